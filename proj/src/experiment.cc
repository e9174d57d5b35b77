// experiment.cc

// Copyright 2026  The ivup Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include "ivup/experiment.h"

#include <array>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "ivup/backend.h"
#include "ivup/bw-stats.h"
#include "ivup/ivector.h"
#include "ivup/parallel.h"
#include "json.hpp"

namespace ivup {

namespace {

using json = nlohmann::json;

const char *const kMethodNames[] = {"baseline-clean", "baseline-noisy",
                                    "baseline-enhanced", "up-fa",
                                    "up-ubm", "up-proposed"};
constexpr int kNumMethods = 6;

// Seed streams of the experiment.
enum : std::uint64_t {
  kCorpusStream = 1,
  kUbmStream = 2,
  kTvStream = 3,
  kNoiseStream = 1000,
};

// Reads `key` into `out` when present; remembers the key as known.
template <typename T>
void Get(const json &section, const char *key, T *out,
         std::set<std::string> *known) {
  known->insert(key);
  if (!section.contains(key)) return;
  try {
    *out = section.at(key).get<T>();
  } catch (const json::exception &e) {
    throw FormatError(std::string("config: bad value for '") + key +
                      "': " + e.what());
  }
}

void RejectUnknown(const json &section, const std::string &name,
                   const std::set<std::string> &known) {
  for (auto it = section.begin(); it != section.end(); ++it)
    if (!known.count(it.key()))
      throw FormatError("config: unknown key '" + it.key() + "' in " + name);
}

json Section(const json &root, const char *name) {
  if (!root.contains(name)) return json::object();
  if (!root.at(name).is_object())
    throw FormatError(std::string("config: section '") + name +
                      "' must be an object");
  return root.at(name);
}

json ConfigJson(const ExperimentConfig &c, bool with_workers) {
  json j;
  j["corpus"] = {{"train_speakers", c.corpus.train_speakers},
                 {"train_utts_per_speaker", c.corpus.train_utts_per_speaker},
                 {"eval_speakers", c.corpus.eval_speakers},
                 {"eval_utts_per_speaker", c.corpus.eval_utts_per_speaker},
                 {"frames_per_utt", c.corpus.frames_per_utt},
                 {"num_components", c.corpus.num_components},
                 {"speaker_shift_scale", c.corpus.speaker_shift_scale},
                 {"loading_scale", c.corpus.loading_scale},
                 {"mean_spread", c.corpus.mean_spread}};
  j["frontend"] = {{"feature_dim", c.frontend.feature_dim}};
  j["ubm"] = {{"num_components", c.ubm.num_components},
              {"num_iters", c.ubm.num_iters},
              {"kmeans_iters", c.ubm.kmeans_iters}};
  j["tv"] = {{"ivector_dim", c.tv.ivector_dim}, {"num_iters", c.tv.num_iters}};
  j["backend"] = {{"lda_dim", c.backend.lda_dim},
                  {"plda_iters", c.backend.plda_iters},
                  {"scoring", c.backend.scoring}};
  j["uncertainty"] = {{"snr_db", c.uncertainty.snr_db},
                      {"noise", c.uncertainty.noise},
                      {"ar_coeff", c.uncertainty.ar_coeff},
                      {"noise_mean_iters", c.uncertainty.noise_mean_iters},
                      {"mode", c.uncertainty.mode}};
  j["trials"] = {{"enroll_per_speaker", c.trials.enroll_per_speaker},
                 {"corrupt_enroll", c.trials.corrupt_enroll}};
  j["output"] = {{"histogram_bins", c.output.histogram_bins},
                 {"write_scores", c.output.write_scores}};
  j["seed"] = c.seed;
  if (with_workers) j["num_workers"] = c.num_workers;
  return j;
}

void WriteText(const std::filesystem::path &path, const std::string &text) {
  std::ofstream os(path);
  if (!os) throw Error("cannot open '" + path.string() + "' for writing");
  os << text << '\n';
  if (!os) throw Error("write failed for '" + path.string() + "'");
}

}  // namespace

void ExperimentConfig::Validate() const {
  auto positive = [](int v, const char *what) {
    if (v < 1) throw InvalidArgument(std::string("config: ") + what + " must be >= 1");
  };
  positive(corpus.train_speakers, "corpus.train_speakers");
  positive(corpus.train_utts_per_speaker, "corpus.train_utts_per_speaker");
  positive(corpus.eval_speakers, "corpus.eval_speakers");
  positive(corpus.frames_per_utt, "corpus.frames_per_utt");
  positive(corpus.num_components, "corpus.num_components");
  positive(frontend.feature_dim, "frontend.feature_dim");
  positive(ubm.num_components, "ubm.num_components");
  positive(tv.ivector_dim, "tv.ivector_dim");
  positive(trials.enroll_per_speaker, "trials.enroll_per_speaker");
  positive(output.histogram_bins, "output.histogram_bins");
  if (ubm.num_iters < 0 || tv.num_iters < 0 || backend.plda_iters < 0 ||
      ubm.kmeans_iters < 0 || uncertainty.noise_mean_iters < 0)
    throw InvalidArgument("config: iteration counts must be >= 0");
  if (corpus.eval_utts_per_speaker <= trials.enroll_per_speaker)
    throw InvalidArgument(
        "config: eval_utts_per_speaker must exceed enroll_per_speaker");
  if (corpus.train_speakers < 2)
    throw InvalidArgument("config: the back-end needs >= 2 training speakers");
  if (backend.lda_dim < 0)
    throw InvalidArgument("config: backend.lda_dim must be >= 0");
  if (backend.scoring != "plda" && backend.scoring != "cosine")
    throw InvalidArgument("config: backend.scoring must be plda or cosine");
  if (uncertainty.noise != "white" && uncertainty.noise != "colored")
    throw InvalidArgument("config: uncertainty.noise must be white or colored");
  if (uncertainty.mode != "oracle" && uncertainty.mode != "zero")
    throw InvalidArgument("config: uncertainty.mode must be oracle or zero");
  if (num_workers < 1) throw InvalidArgument("config: num_workers must be >= 1");
}

ExperimentConfig ExperimentConfigFromJson(const std::string &text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::exception &e) {
    throw FormatError(std::string("config: ") + e.what());
  }
  if (!root.is_object()) throw FormatError("config: expected a JSON object");
  ExperimentConfig c;
  std::set<std::string> known;

  json s = Section(root, "corpus");
  Get(s, "train_speakers", &c.corpus.train_speakers, &known);
  Get(s, "train_utts_per_speaker", &c.corpus.train_utts_per_speaker, &known);
  Get(s, "eval_speakers", &c.corpus.eval_speakers, &known);
  Get(s, "eval_utts_per_speaker", &c.corpus.eval_utts_per_speaker, &known);
  Get(s, "frames_per_utt", &c.corpus.frames_per_utt, &known);
  Get(s, "num_components", &c.corpus.num_components, &known);
  Get(s, "speaker_shift_scale", &c.corpus.speaker_shift_scale, &known);
  Get(s, "loading_scale", &c.corpus.loading_scale, &known);
  Get(s, "mean_spread", &c.corpus.mean_spread, &known);
  RejectUnknown(s, "corpus", known);

  known.clear();
  s = Section(root, "frontend");
  Get(s, "feature_dim", &c.frontend.feature_dim, &known);
  RejectUnknown(s, "frontend", known);

  known.clear();
  s = Section(root, "ubm");
  Get(s, "num_components", &c.ubm.num_components, &known);
  Get(s, "num_iters", &c.ubm.num_iters, &known);
  Get(s, "kmeans_iters", &c.ubm.kmeans_iters, &known);
  RejectUnknown(s, "ubm", known);

  known.clear();
  s = Section(root, "tv");
  Get(s, "ivector_dim", &c.tv.ivector_dim, &known);
  Get(s, "num_iters", &c.tv.num_iters, &known);
  RejectUnknown(s, "tv", known);

  known.clear();
  s = Section(root, "backend");
  Get(s, "lda_dim", &c.backend.lda_dim, &known);
  Get(s, "plda_iters", &c.backend.plda_iters, &known);
  Get(s, "scoring", &c.backend.scoring, &known);
  RejectUnknown(s, "backend", known);

  known.clear();
  s = Section(root, "uncertainty");
  Get(s, "snr_db", &c.uncertainty.snr_db, &known);
  Get(s, "noise", &c.uncertainty.noise, &known);
  Get(s, "ar_coeff", &c.uncertainty.ar_coeff, &known);
  Get(s, "noise_mean_iters", &c.uncertainty.noise_mean_iters, &known);
  Get(s, "mode", &c.uncertainty.mode, &known);
  RejectUnknown(s, "uncertainty", known);

  known.clear();
  s = Section(root, "trials");
  Get(s, "enroll_per_speaker", &c.trials.enroll_per_speaker, &known);
  Get(s, "corrupt_enroll", &c.trials.corrupt_enroll, &known);
  RejectUnknown(s, "trials", known);

  known.clear();
  s = Section(root, "output");
  Get(s, "histogram_bins", &c.output.histogram_bins, &known);
  Get(s, "write_scores", &c.output.write_scores, &known);
  RejectUnknown(s, "output", known);

  known = {"corpus", "frontend", "ubm", "tv", "backend", "uncertainty",
           "trials", "output"};
  Get(root, "seed", &c.seed, &known);
  Get(root, "num_workers", &c.num_workers, &known);
  RejectUnknown(root, "the top level", known);

  c.Validate();
  return c;
}

std::string ExperimentConfigToJson(const ExperimentConfig &cfg) {
  return ConfigJson(cfg, true).dump(2);
}

ExperimentConfig ReadExperimentConfig(const std::filesystem::path &path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open config '" + path.string() + "'");
  std::stringstream ss;
  ss << is.rdbuf();
  return ExperimentConfigFromJson(ss.str());
}

const MethodResult &ExperimentResult::Method(const std::string &name) const {
  for (const auto &m : methods)
    if (m.name == name) return m;
  throw InvalidArgument("no method named '" + name + "'");
}

ExperimentResult RunExperiment(const ExperimentConfig &cfg,
                               const std::filesystem::path &out_dir) {
  cfg.Validate();
  const int workers = cfg.num_workers;

  GenerativeSpec gen;
  gen.num_speakers = cfg.corpus.train_speakers;
  gen.utts_per_speaker = cfg.corpus.train_utts_per_speaker;
  gen.frames_per_utt = cfg.corpus.frames_per_utt;
  gen.feature_dim = cfg.frontend.feature_dim;
  gen.num_components = cfg.corpus.num_components;
  gen.ivector_dim = cfg.tv.ivector_dim;
  gen.speaker_shift_scale = cfg.corpus.speaker_shift_scale;
  gen.loading_scale = cfg.corpus.loading_scale;
  gen.mean_spread = cfg.corpus.mean_spread;
  gen.rng_seed = SubstreamSeed(cfg.seed, kCorpusStream);
  const GmmModel true_gmm = SynthUbm(gen);
  const TvModel true_tv = SynthTv(gen, true_gmm);
  const CorpusBundle train = SynthCorpus(gen, true_gmm, true_tv, 0);
  GenerativeSpec eval_gen = gen;
  eval_gen.num_speakers = cfg.corpus.eval_speakers;
  eval_gen.utts_per_speaker = cfg.corpus.eval_utts_per_speaker;
  const CorpusBundle eval =
      SynthCorpus(eval_gen, true_gmm, true_tv, cfg.corpus.train_speakers);

  ExperimentResult result;

  // UBM and total-variability model on clean training data.
  std::vector<FeatureMatrix> train_feats;
  for (const auto &u : train.utterances) train_feats.push_back(u.clean);
  UbmTrainOptions ubm_opts;
  ubm_opts.num_components = cfg.ubm.num_components;
  ubm_opts.num_iters = cfg.ubm.num_iters;
  ubm_opts.kmeans_iters = cfg.ubm.kmeans_iters;
  ubm_opts.seed = SubstreamSeed(cfg.seed, kUbmStream);
  ubm_opts.num_workers = workers;
  UbmTrainResult ubm_res = TrainUbm(train_feats, ubm_opts);
  const GmmModel &ubm = ubm_res.gmm;
  result.ubm_loglik = ubm_res.loglik_history;

  std::vector<BwStats> train_stats(train_feats.size());
  ParallelFor(train_feats.size(), workers, [&](std::size_t i) {
    train_stats[i] = AccumulateStandard(ubm, train_feats[i]);
  });
  TvTrainOptions tv_opts;
  tv_opts.ivector_dim = cfg.tv.ivector_dim;
  tv_opts.num_iters = cfg.tv.num_iters;
  tv_opts.seed = SubstreamSeed(cfg.seed, kTvStream);
  tv_opts.num_workers = workers;
  TvTrainResult tv_res = TrainTv(train_stats, ubm, tv_opts);
  result.tv_objective = tv_res.objective_history;
  const IvectorExtractor extractor(tv_res.tv);
  const RowMatrix &resid = extractor.Model().v_diag;

  // Back-end on clean training i-vectors.
  std::vector<Vector> train_iv(train_stats.size());
  ParallelFor(train_stats.size(), workers, [&](std::size_t i) {
    train_iv[i] = extractor.Extract(NormalizeStats(resid, train_stats[i])).mean;
  });
  std::vector<int> train_labels;
  for (std::size_t i = 0; i < train.utterances.size(); ++i)
    train_labels.push_back(static_cast<int>(i) /
                           cfg.corpus.train_utts_per_speaker);
  BackendConfig be_cfg;
  be_cfg.lda_dim = cfg.backend.lda_dim;
  be_cfg.plda_iters = cfg.backend.plda_iters;
  const BackendModel backend =
      TrainBackend(train_iv, train_labels, be_cfg, &result.plda_loglik);

  // Evaluation side: corrupt, enhance, uncertainty, one i-vector per method.
  const std::size_t U = eval.utterances.size();
  const int per_spk = cfg.corpus.eval_utts_per_speaker;
  auto is_enroll = [&](std::size_t i) {
    return static_cast<int>(i) % per_spk < cfg.trials.enroll_per_speaker;
  };
  CorruptionSpec corr;
  corr.target_snr_db = cfg.uncertainty.snr_db;
  corr.kind = cfg.uncertainty.noise == "colored" ? NoiseKind::kColored
                                                 : NoiseKind::kWhite;
  corr.ar_coeff = cfg.uncertainty.ar_coeff;
  EnhanceOptions enh_opts;
  enh_opts.noise_mean_iters = cfg.uncertainty.noise_mean_iters;
  const bool oracle = cfg.uncertainty.mode == "oracle";

  std::vector<std::array<Vector, kNumMethods>> projected(U);
  std::map<std::string, BwStats> biased, unbiased;
  std::vector<BwStats> biased_v(U), unbiased_v(U);
  std::vector<double> snr(U);
  ParallelFor(U, workers, [&](std::size_t i) {
    const FeatureMatrix &clean = eval.utterances[i].clean;
    CorruptionSpec cs = corr;
    cs.rng_seed = SubstreamSeed(cfg.seed, kNoiseStream + i);
    FeatureMatrix noisy = Corrupt(clean, cs);
    FeatureMatrix enhanced = Enhance(noisy, ubm, enh_opts);
    UncertaintySequence unc =
        oracle ? OracleUncertainty(clean, enhanced) : ZeroUncertainty(enhanced);
    snr[i] = MeasureSnrDb(clean, noisy);

    BwStats std_enh = AccumulateStandard(ubm, enhanced);
    BwStats ubm_enh = AccumulateUbmUncertain(ubm, enhanced, unc);
    auto project = [&](const NormalizedStats &s) {
      return backend.Project(extractor.Extract(s).mean);
    };
    auto &out = projected[i];
    out[0] = project(NormalizeStats(resid, AccumulateStandard(ubm, clean)));
    if (is_enroll(i) && !cfg.trials.corrupt_enroll) {
      for (int m = 1; m < kNumMethods; ++m) out[m] = out[0];
    } else {
      out[1] = project(NormalizeStats(resid, AccumulateStandard(ubm, noisy)));
      out[2] = project(NormalizeStats(resid, std_enh));
      out[3] = project(AccumulateFaUncertain(ubm, resid, enhanced, unc));
      out[4] = project(NormalizeStats(resid, ubm_enh));
      out[5] = project(AccumulateProposed(ubm, resid, enhanced, unc));
    }
    biased_v[i] = std::move(std_enh);
    unbiased_v[i] = std::move(ubm_enh);
  });
  for (std::size_t i = 0; i < U; ++i) {
    biased[eval.utterances[i].utt_id] = biased_v[i];
    unbiased[eval.utterances[i].utt_id] = unbiased_v[i];
  }

  std::vector<std::size_t> enroll_idx, test_idx;
  double snr_sum = 0.0;
  for (std::size_t i = 0; i < U; ++i) {
    if (is_enroll(i)) {
      enroll_idx.push_back(i);
    } else {
      test_idx.push_back(i);
      snr_sum += snr[i];
    }
  }
  result.mean_test_snr_db = snr_sum / static_cast<double>(test_idx.size());
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t e : enroll_idx)
    for (std::size_t t : test_idx) {
      pairs.emplace_back(e, t);
      result.trials.push_back(
          Trial{eval.utterances[e].utt_id, eval.utterances[t].utt_id,
                eval.utterances[e].speaker_id == eval.utterances[t].speaker_id});
    }
  std::vector<std::uint8_t> labels;
  for (const auto &t : result.trials) labels.push_back(t.target ? 1 : 0);

  const PldaScorer plda(backend.plda);
  const bool use_plda = cfg.backend.scoring == "plda";
  for (int m = 0; m < kNumMethods; ++m) {
    MethodResult mr;
    mr.name = kMethodNames[m];
    mr.scores.resize(pairs.size());
    ParallelFor(pairs.size(), workers, [&](std::size_t k) {
      const Vector &a = projected[pairs[k].first][m];
      const Vector &b = projected[pairs[k].second][m];
      mr.scores[k] = use_plda ? plda.Score(a, b) : CosineScore(a, b);
    });
    mr.report = Evaluate(mr.scores, labels, cfg.output.histogram_bins);
    result.methods.push_back(std::move(mr));
  }
  result.cosine = FstatCosineReport(result.trials, biased, unbiased);

  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    WriteTrials(out_dir / "trials.tsv", result.trials);
    const std::string set_names[] = {"nontarget", "target"};
    for (const auto &mr : result.methods) {
      if (cfg.output.write_scores)
        WriteScoresCsv(out_dir / ("scores_" + mr.name + ".csv"), result.trials,
                       mr.scores);
      WriteDetCsv(out_dir / ("det_" + mr.name + ".csv"), mr.report.det);
      WriteHistogramCsv(out_dir / ("hist_" + mr.name + ".csv"),
                        mr.report.histogram, set_names);
    }
    WriteCosineReportCsv(out_dir / "fstat_cosine.csv", result.trials,
                         result.cosine);
    WriteText(out_dir / "summary.json", SummaryJson(cfg, result));
  }
  return result;
}

std::string SummaryJson(const ExperimentConfig &cfg,
                        const ExperimentResult &result) {
  json j;
  j["config"] = ConfigJson(cfg, false);
  json methods = json::array();
  for (const auto &m : result.methods)
    methods.push_back({{"name", m.name},
                       {"eer", m.report.eer},
                       {"threshold", m.report.eer_threshold},
                       {"n_trials", m.report.num_trials},
                       {"n_targets", m.report.num_targets}});
  j["methods"] = methods;
  const double noisy = result.Method("baseline-noisy").report.eer;
  const double enhanced = result.Method("baseline-enhanced").report.eer;
  const double proposed = result.Method("up-proposed").report.eer;
  j["ordering"] = {{"noisy_above_enhanced", noisy > enhanced},
                   {"proposed_below_enhanced", proposed < enhanced},
                   {"noisy_minus_enhanced", noisy - enhanced},
                   {"enhanced_minus_proposed", enhanced - proposed}};
  j["fstat_cosine"] = {
      {"biased_target_mean", result.cosine.biased_target_mean},
      {"biased_nontarget_mean", result.cosine.biased_nontarget_mean},
      {"unbiased_target_mean", result.cosine.unbiased_target_mean},
      {"unbiased_nontarget_mean", result.cosine.unbiased_nontarget_mean}};
  j["training"] = {{"ubm_loglik", result.ubm_loglik},
                   {"tv_objective", result.tv_objective},
                   {"plda_loglik", result.plda_loglik}};
  j["mean_test_snr_db"] = result.mean_test_snr_db;
  return j.dump(2);
}

}  // namespace ivup

// ivup-cli.cc

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

// Command-line front end. Every subcommand accepts --seed, --config and
// --out; the config is the experiment JSON (see README), of which each
// subcommand reads the sections it needs.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

#include "CLI11.hpp"
#include "ivup/backend.h"
#include "ivup/bw-stats.h"
#include "ivup/corpus-synth.h"
#include "ivup/eval.h"
#include "ivup/experiment.h"
#include "ivup/frontend.h"
#include "ivup/gmm.h"
#include "ivup/ivector.h"
#include "ivup/kernels.h"
#include "ivup/parallel.h"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace ivup;

namespace {

struct Common {
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string config;
  std::string out;
  int workers = 1;
};

void AddCommon(CLI::App *app, Common *c, bool out_required = true) {
  app->add_option("--seed", c->seed, "Random seed (overrides the config)")
      ->each([c](const std::string &) { c->seed_set = true; });
  app->add_option("--config", c->config, "Experiment config (JSON)")
      ->check(CLI::ExistingFile);
  auto *out = app->add_option("--out", c->out, "Output file or directory");
  if (out_required) out->required();
  app->add_option("--workers", c->workers, "Worker threads")
      ->check(CLI::PositiveNumber);
}

ExperimentConfig LoadConfig(const Common &c) {
  ExperimentConfig cfg =
      c.config.empty() ? ExperimentConfig{} : ReadExperimentConfig(c.config);
  if (c.seed_set) cfg.seed = c.seed;
  cfg.num_workers = c.workers;
  return cfg;
}

GenerativeSpec SpecFromConfig(const ExperimentConfig &cfg, bool eval_side) {
  GenerativeSpec g;
  g.num_speakers = eval_side ? cfg.corpus.eval_speakers : cfg.corpus.train_speakers;
  g.utts_per_speaker = eval_side ? cfg.corpus.eval_utts_per_speaker
                                 : cfg.corpus.train_utts_per_speaker;
  g.frames_per_utt = cfg.corpus.frames_per_utt;
  g.feature_dim = cfg.frontend.feature_dim;
  g.num_components = cfg.corpus.num_components;
  g.ivector_dim = cfg.tv.ivector_dim;
  g.speaker_shift_scale = cfg.corpus.speaker_shift_scale;
  g.loading_scale = cfg.corpus.loading_scale;
  g.mean_spread = cfg.corpus.mean_spread;
  g.rng_seed = cfg.seed;
  return g;
}

struct ManifestEntry {
  std::string utt_id, speaker_id;
  fs::path path;
};

std::vector<ManifestEntry> ReadManifest(const fs::path &dir) {
  std::ifstream is(dir / "manifest.tsv");
  if (!is) throw Error("cannot open '" + (dir / "manifest.tsv").string() + "'");
  std::vector<ManifestEntry> out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    ManifestEntry e;
    std::string rel;
    if (!std::getline(ss, e.utt_id, '\t') ||
        !std::getline(ss, e.speaker_id, '\t') || !std::getline(ss, rel))
      throw FormatError("manifest.tsv: malformed line '" + line + "'");
    e.path = dir / rel;
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<FeatureMatrix> LoadFeatures(const std::vector<ManifestEntry> &m,
                                        int workers) {
  std::vector<FeatureMatrix> feats(m.size());
  ParallelFor(m.size(), workers, [&](std::size_t i) {
    feats[i] = ReadFeatures(m[i].path);
    feats[i].utt_id = m[i].utt_id;
  });
  return feats;
}

void WriteJsonFile(const fs::path &path, const nlohmann::json &j) {
  std::ofstream os(path);
  if (!os) throw Error("cannot open '" + path.string() + "' for writing");
  os << j.dump(2) << '\n';
}

int CmdSynth(const Common &c, bool eval_side, int first_speaker) {
  ExperimentConfig cfg = LoadConfig(c);
  GenerativeSpec spec = SpecFromConfig(cfg, eval_side);
  GmmModel gmm = SynthUbm(spec);
  TvModel tv = SynthTv(spec, gmm);
  WriteCorpus(c.out, SynthCorpus(spec, gmm, tv, first_speaker));
  return 0;
}

int CmdFeatures(const Common &c, const std::vector<std::string> &wavs,
                bool vad, bool cmvn) {
  MfccConfig mcfg;
  fs::create_directories(c.out);
  for (const auto &w : wavs) {
    Waveform wav = ReadWav(w);
    mcfg.sample_rate_hz = wav.sample_rate_hz;
    const std::string id = fs::path(w).stem().string();
    FeatureMatrix fm = ExtractMfcc(wav.samples, mcfg, id);
    fm = AppendDeltas(fm, mcfg.delta_window);
    if (vad) fm = EnergyVad(fm);
    if (cmvn) fm = Cmvn(fm).features;
    WriteFeatures(fs::path(c.out) / (id + ".uvfm"), fm);
  }
  return 0;
}

int CmdTrainUbm(const Common &c, const std::string &corpus) {
  ExperimentConfig cfg = LoadConfig(c);
  auto feats = LoadFeatures(ReadManifest(corpus), c.workers);
  UbmTrainOptions opts;
  opts.num_components = cfg.ubm.num_components;
  opts.num_iters = cfg.ubm.num_iters;
  opts.kmeans_iters = cfg.ubm.kmeans_iters;
  opts.seed = cfg.seed;
  opts.num_workers = c.workers;
  UbmTrainResult res = TrainUbm(feats, opts);
  WriteGmm(c.out, res.gmm);
  for (std::size_t i = 0; i < res.loglik_history.size(); ++i)
    LogInfo("UBM iteration " + std::to_string(i) + ": average log-likelihood " +
            std::to_string(res.loglik_history[i]));
  return 0;
}

int CmdTrainTv(const Common &c, const std::string &corpus,
               const std::string &ubm_path) {
  ExperimentConfig cfg = LoadConfig(c);
  GmmModel ubm = ReadGmm(ubm_path);
  auto feats = LoadFeatures(ReadManifest(corpus), c.workers);
  std::vector<BwStats> stats(feats.size());
  ParallelFor(feats.size(), c.workers,
              [&](std::size_t i) { stats[i] = AccumulateStandard(ubm, feats[i]); });
  TvTrainOptions opts;
  opts.ivector_dim = cfg.tv.ivector_dim;
  opts.num_iters = cfg.tv.num_iters;
  opts.seed = cfg.seed;
  opts.num_workers = c.workers;
  TvTrainResult res = TrainTv(stats, ubm, opts);
  WriteTv(c.out, res.tv);
  for (std::size_t i = 0; i < res.objective_history.size(); ++i)
    LogInfo("TV iteration " + std::to_string(i) + ": objective " +
            std::to_string(res.objective_history[i]));
  return 0;
}

int CmdStats(const Common &c, const std::string &corpus,
             const std::string &ubm_path, const std::string &tv_path,
             const std::string &variant_name) {
  ExperimentConfig cfg = LoadConfig(c);
  const StatsVariant variant = VariantFromName(variant_name);
  if (variant == StatsVariant::kNormalized)
    throw InvalidArgument("stats: choose standard, ubm-uncertain, fa-uncertain "
                          "or proposed");
  GmmModel ubm = ReadGmm(ubm_path);
  RowMatrix resid = ubm.vars;
  if (!tv_path.empty()) resid = ReadTv(tv_path).v_diag;
  auto manifest = ReadManifest(corpus);
  auto feats = LoadFeatures(manifest, c.workers);
  fs::create_directories(c.out);

  CorruptionSpec corr;
  corr.target_snr_db = cfg.uncertainty.snr_db;
  corr.kind = cfg.uncertainty.noise == "colored" ? NoiseKind::kColored
                                                 : NoiseKind::kWhite;
  corr.ar_coeff = cfg.uncertainty.ar_coeff;
  ParallelFor(feats.size(), c.workers, [&](std::size_t i) {
    const fs::path path = fs::path(c.out) / (manifest[i].utt_id + ".uvst");
    if (variant == StatsVariant::kStandard) {
      WriteStats(path, AccumulateStandard(ubm, feats[i]));
      return;
    }
    CorruptionSpec cs = corr;
    cs.rng_seed = SubstreamSeed(cfg.seed, i);
    EnhanceOptions eo;
    eo.noise_mean_iters = cfg.uncertainty.noise_mean_iters;
    FeatureMatrix enhanced = Enhance(Corrupt(feats[i], cs), ubm, eo);
    UncertaintySequence unc = cfg.uncertainty.mode == "oracle"
                                  ? OracleUncertainty(feats[i], enhanced)
                                  : ZeroUncertainty(enhanced);
    switch (variant) {
      case StatsVariant::kUbmUncertain:
        WriteStats(path, AccumulateUbmUncertain(ubm, enhanced, unc));
        break;
      case StatsVariant::kFaUncertain:
        WriteStats(path, AccumulateFaUncertain(ubm, resid, enhanced, unc));
        break;
      default:
        WriteStats(path, AccumulateProposed(ubm, resid, enhanced, unc));
    }
  });
  return 0;
}

int CmdExtract(const Common &c, const std::string &stats_dir,
               const std::string &tv_path) {
  IvectorExtractor extractor(ReadTv(tv_path));
  std::vector<fs::path> files;
  for (const auto &e : fs::directory_iterator(stats_dir))
    if (e.path().extension() == ".uvst") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::vector<IVector> ivs(files.size());
  ParallelFor(files.size(), c.workers, [&](std::size_t i) {
    AnyStats s = ReadStats(files[i]);
    ivs[i] = IsNormalizedVariant(s.variant)
                 ? extractor.Extract(s.normed)
                 : extractor.Extract(
                       NormalizeStats(extractor.Model().v_diag, s.raw));
  });
  WriteIvectorsCsv(c.out, ivs);
  return 0;
}

int CmdBackendTrain(const Common &c, const std::string &ivectors,
                    const std::string &corpus) {
  ExperimentConfig cfg = LoadConfig(c);
  std::map<std::string, std::string> speaker_of;
  for (const auto &e : ReadManifest(corpus)) speaker_of[e.utt_id] = e.speaker_id;
  std::map<std::string, int> speaker_index;
  std::vector<Vector> data;
  std::vector<int> labels;
  for (auto &iv : ReadIvectorsCsv(ivectors)) {
    auto it = speaker_of.find(iv.utt_id);
    if (it == speaker_of.end())
      throw InvalidArgument("no speaker for '" + iv.utt_id + "' in manifest");
    auto [pos, inserted] = speaker_index.emplace(
        it->second, static_cast<int>(speaker_index.size()));
    labels.push_back(pos->second);
    data.push_back(std::move(iv.mean));
  }
  BackendConfig bc;
  bc.lda_dim = cfg.backend.lda_dim;
  bc.plda_iters = cfg.backend.plda_iters;
  WriteBackend(c.out, TrainBackend(data, labels, bc));
  return 0;
}

int CmdScore(const Common &c, const std::string &backend_path,
             const std::string &trials_path, const std::string &ivectors) {
  ExperimentConfig cfg = LoadConfig(c);
  BackendModel backend = ReadBackend(backend_path);
  std::map<std::string, Vector> projected;
  for (const auto &iv : ReadIvectorsCsv(ivectors))
    projected[iv.utt_id] = backend.Project(iv.mean);
  auto trials = ReadTrials(trials_path);
  auto get = [&](const std::string &id) -> const Vector & {
    auto it = projected.find(id);
    if (it == projected.end())
      throw InvalidArgument("no i-vector for '" + id + "'");
    return it->second;
  };
  PldaScorer plda(backend.plda);
  std::vector<double> scores(trials.size());
  for (std::size_t k = 0; k < trials.size(); ++k) {
    const Vector &a = get(trials[k].enroll_id), &b = get(trials[k].test_id);
    scores[k] = cfg.backend.scoring == "cosine" ? CosineScore(a, b)
                                                : plda.Score(a, b);
  }
  WriteScoresCsv(c.out, trials, scores);
  return 0;
}

int CmdEval(const Common &c, const std::string &scores_path) {
  ExperimentConfig cfg = LoadConfig(c);
  std::vector<Trial> trials;
  std::vector<double> scores;
  ReadScoresCsv(scores_path, &trials, &scores);
  std::vector<std::uint8_t> labels;
  for (const auto &t : trials) labels.push_back(t.target ? 1 : 0);
  EvalReport r = Evaluate(scores, labels, cfg.output.histogram_bins);
  fs::create_directories(c.out);
  WriteDetCsv(fs::path(c.out) / "det.csv", r.det);
  const std::string names[] = {"nontarget", "target"};
  WriteHistogramCsv(fs::path(c.out) / "hist.csv", r.histogram, names);
  WriteJsonFile(fs::path(c.out) / "report.json",
                {{"eer", r.eer},
                 {"threshold", r.eer_threshold},
                 {"n_trials", r.num_trials},
                 {"n_targets", r.num_targets}});
  std::cout << "EER " << 100.0 * r.eer << " % at threshold " << r.eer_threshold
            << " (" << r.num_trials << " trials)\n";
  return 0;
}

int CmdRun(const Common &c) {
  ExperimentConfig cfg = LoadConfig(c);
  ExperimentResult res = RunExperiment(cfg, c.out);
  for (const auto &m : res.methods)
    std::printf("%-18s EER %6.2f %%\n", m.name.c_str(), 100.0 * m.report.eer);
  std::printf("F-stat cosine distance, non-target mean: biased %.4f, "
              "unbiased %.4f\n",
              res.cosine.biased_nontarget_mean,
              res.cosine.unbiased_nontarget_mean);
  return 0;
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"ivup: i-vector speaker verification with uncertainty "
               "propagation"};
  app.require_subcommand(1);
  bool verbose = false, quiet = false;
  std::string simd;
  app.add_flag("-v,--verbose", verbose, "Log progress");
  app.add_flag("-q,--quiet", quiet, "Suppress warnings");
  app.add_option("--simd", simd, "Kernel set: scalar or avx2")
      ->check(CLI::IsMember({"scalar", "avx2"}));

  Common c;
  bool eval_side = false, vad = true, cmvn = true;
  int first_speaker = 0;
  std::vector<std::string> wavs;
  std::string corpus, ubm, tv, variant = "standard", stats_dir, ivectors,
                      backend, trials, scores;

  auto *synth = app.add_subcommand("synth", "Generate a synthetic corpus");
  AddCommon(synth, &c);
  synth->add_flag("--eval", eval_side, "Use the evaluation-side counts");
  synth->add_option("--first-speaker", first_speaker, "Index of the first speaker");

  auto *features = app.add_subcommand("features", "MFCC features from WAV files");
  AddCommon(features, &c);
  features->add_option("wavs", wavs, "Input WAV files")->required();
  features->add_flag("!--no-vad", vad, "Keep every frame voiced");
  features->add_flag("!--no-cmvn", cmvn, "Skip mean/variance normalisation");

  auto *train_ubm = app.add_subcommand("train-ubm", "Train the UBM");
  AddCommon(train_ubm, &c);
  train_ubm->add_option("--corpus", corpus, "Corpus directory")->required();

  auto *train_tv = app.add_subcommand("train-tv", "Train the TV matrix");
  AddCommon(train_tv, &c);
  train_tv->add_option("--corpus", corpus, "Corpus directory")->required();
  train_tv->add_option("--ubm", ubm, "UBM file")->required();

  auto *stats = app.add_subcommand("stats", "Baum-Welch statistics");
  AddCommon(stats, &c);
  stats->add_option("--corpus", corpus, "Corpus directory")->required();
  stats->add_option("--ubm", ubm, "UBM file")->required();
  stats->add_option("--tv", tv, "TV file supplying the residual covariance");
  stats->add_option("--variant", variant,
                    "standard, ubm-uncertain, fa-uncertain or proposed");

  auto *extract = app.add_subcommand("extract", "Extract i-vectors");
  AddCommon(extract, &c);
  extract->add_option("--stats", stats_dir, "Statistics directory")->required();
  extract->add_option("--tv", tv, "TV file")->required();

  auto *backend_train = app.add_subcommand("backend-train", "Train the back-end");
  AddCommon(backend_train, &c);
  backend_train->add_option("--ivectors", ivectors, "I-vector CSV")->required();
  backend_train->add_option("--corpus", corpus, "Corpus with speaker labels")
      ->required();

  auto *score = app.add_subcommand("score", "Score a trial list");
  AddCommon(score, &c);
  score->add_option("--backend", backend, "Back-end model")->required();
  score->add_option("--trials", trials, "Trial list")->required();
  score->add_option("--ivectors", ivectors, "I-vector CSV")->required();

  auto *eval = app.add_subcommand("eval", "EER, DET and histograms");
  AddCommon(eval, &c);
  eval->add_option("--scores", scores, "Scores CSV")->required();

  auto *run = app.add_subcommand("run", "Run the full synthetic experiment");
  AddCommon(run, &c);

  CLI11_PARSE(app, argc, argv);
  SetLogLevel(quiet ? LogLevel::kQuiet
                    : verbose ? LogLevel::kInfo : LogLevel::kWarning);
  if (!simd.empty())
    kernels::SetActive(simd == "avx2" ? kernels::Isa::kAvx2
                                      : kernels::Isa::kScalar);

  try {
    if (*synth) return CmdSynth(c, eval_side, first_speaker);
    if (*features) return CmdFeatures(c, wavs, vad, cmvn);
    if (*train_ubm) return CmdTrainUbm(c, corpus);
    if (*train_tv) return CmdTrainTv(c, corpus, ubm);
    if (*stats) return CmdStats(c, corpus, ubm, tv, variant);
    if (*extract) return CmdExtract(c, stats_dir, tv);
    if (*backend_train) return CmdBackendTrain(c, ivectors, corpus);
    if (*score) return CmdScore(c, backend, trials, ivectors);
    if (*eval) return CmdEval(c, scores);
    if (*run) return CmdRun(c);
  } catch (const std::exception &e) {
    std::cerr << "ERROR (ivup): " << e.what() << '\n';
    return 1;
  }
  return 0;
}

// corpus-synth.cc

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

#include "ivup/corpus-synth.h"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <random>
#include <sstream>

#include "ivup/parallel.h"

namespace ivup {

namespace {

// Stream tags, kept far apart so that item indices never collide.
constexpr std::uint64_t kUbmStream = 1ull << 56;
constexpr std::uint64_t kTvStream = 2ull << 56;
constexpr std::uint64_t kSpeakerStream = 3ull << 56;
constexpr std::uint64_t kUttStream = 4ull << 56;

std::uint64_t SplitMix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

std::string SpeakerName(int s) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "spk%03d", s);
  return buf;
}

std::string UttName(int s, int u) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "spk%03d-u%03d", s, u);
  return buf;
}

double VoicedEnergy(const RowMatrix &m, const std::vector<std::uint8_t> &mask) {
  double e = 0.0;
  for (Eigen::Index t = 0; t < m.rows(); ++t)
    if (mask.empty() || mask[t]) e += m.row(t).squaredNorm();
  return e;
}

}  // namespace

void GenerativeSpec::Validate() const {
  if (num_speakers < 1 || utts_per_speaker < 1 || frames_per_utt < 1 ||
      feature_dim < 1 || num_components < 1 || ivector_dim < 1)
    throw InvalidArgument("generative spec: all counts must be >= 1");
  if (static_cast<double>(num_components) * feature_dim >
      std::numeric_limits<std::int32_t>::max())
    throw InvalidArgument("generative spec: C*F overflows the index space");
  if (ivector_dim > num_components * feature_dim)
    throw InvalidArgument("generative spec: D must not exceed C*F");
  if (!(speaker_shift_scale >= 0.0) || !std::isfinite(speaker_shift_scale))
    throw InvalidArgument("generative spec: speaker_shift_scale must be >= 0");
  if (!(loading_scale >= 0.0) || !std::isfinite(loading_scale))
    throw InvalidArgument("generative spec: loading_scale must be >= 0");
  if (!(mean_spread > 0.0) || !std::isfinite(mean_spread))
    throw InvalidArgument("generative spec: mean_spread must be > 0");
}

void CorruptionSpec::Validate() const {
  if (!std::isfinite(target_snr_db))
    throw InvalidArgument("corruption: target SNR must be finite");
  if (kind == NoiseKind::kColored && !(ar_coeff > -1.0 && ar_coeff < 1.0))
    throw InvalidArgument("corruption: AR coefficient must lie in (-1, 1)");
}

std::uint64_t SubstreamSeed(std::uint64_t seed, std::uint64_t index) {
  return seed ^ SplitMix64(index);
}

GmmModel SynthUbm(const GenerativeSpec &spec) {
  spec.Validate();
  const int C = spec.num_components, F = spec.feature_dim;
  std::mt19937_64 rng(SubstreamSeed(spec.rng_seed, kUbmStream));
  std::uniform_real_distribution<double> unit(0.5, 1.5);
  std::normal_distribution<double> normal(0.0, 1.0);

  GmmModel gmm;
  gmm.vars.resize(C, F);
  for (int c = 0; c < C; ++c)
    for (int f = 0; f < F; ++f)
      gmm.vars(c, f) = std::max(unit(rng), kVarianceFloor);
  gmm.weights.resize(C);
  for (int c = 0; c < C; ++c) gmm.weights(c) = unit(rng);
  gmm.weights /= gmm.weights.sum();

  const double avg_std = gmm.vars.array().sqrt().mean();
  const double min_dist = 4.0 * avg_std;
  double scale = spec.mean_spread * avg_std;
  gmm.means.resize(C, F);
  for (int c = 0; c < C; ++c) {
    for (int attempt = 1;; ++attempt) {
      for (int f = 0; f < F; ++f) gmm.means(c, f) = scale * normal(rng);
      bool ok = true;
      for (int k = 0; k < c && ok; ++k)
        ok = (gmm.means.row(c) - gmm.means.row(k)).norm() >= min_dist;
      if (ok) break;
      if (attempt % 100 == 0) scale *= 1.25;
    }
  }
  gmm.Validate();
  return gmm;
}

TvModel SynthTv(const GenerativeSpec &spec, const GmmModel &gmm) {
  spec.Validate();
  gmm.Validate();
  const Eigen::Index C = gmm.NumComponents(), F = gmm.Dim(),
                     D = spec.ivector_dim;
  if (D > C * F) throw InvalidArgument("synth_tv: D exceeds C*F");
  std::mt19937_64 rng(SubstreamSeed(spec.rng_seed, kTvStream));
  std::normal_distribution<double> normal(0.0, 1.0);
  const double base = spec.loading_scale / std::sqrt(static_cast<double>(D));
  TvModel tv;
  tv.t.resize(C * F, D);
  for (Eigen::Index c = 0; c < C; ++c)
    for (Eigen::Index f = 0; f < F; ++f) {
      const double s = base * std::sqrt(gmm.vars(c, f));
      for (Eigen::Index d = 0; d < D; ++d) tv.t(c * F + f, d) = s * normal(rng);
    }
  tv.v_diag = gmm.vars;
  return tv;
}

CorpusBundle SynthCorpus(const GenerativeSpec &spec, const GmmModel &gmm,
                         const TvModel &tv, int first_speaker) {
  spec.Validate();
  gmm.Validate();
  tv.Validate();
  const Eigen::Index C = gmm.NumComponents(), F = gmm.Dim(),
                     D = tv.IvectorDim();
  if (tv.NumComponents() != C || tv.FeatDim() != F)
    throw DimensionError("synth_corpus: TV model does not match the GMM");
  if (spec.num_components != C || spec.feature_dim != F ||
      spec.ivector_dim != D)
    throw DimensionError("synth_corpus: spec does not match the models");
  if (first_speaker < 0)
    throw InvalidArgument("synth_corpus: first_speaker must be >= 0");

  const int S = spec.num_speakers, U = spec.utts_per_speaker,
            L = spec.frames_per_utt;
  std::vector<Vector> offsets(S);
  for (int s = 0; s < S; ++s) {
    std::mt19937_64 rng(
        SubstreamSeed(spec.rng_seed, kSpeakerStream + first_speaker + s));
    std::normal_distribution<double> normal(0.0, 1.0);
    offsets[s].resize(D);
    for (Eigen::Index d = 0; d < D; ++d)
      offsets[s](d) = spec.speaker_shift_scale * normal(rng);
  }

  const RowMatrix stddev = gmm.vars.array().sqrt();
  std::vector<double> weights(gmm.weights.data(),
                              gmm.weights.data() + gmm.weights.size());

  CorpusBundle bundle;
  bundle.gmm = gmm;
  bundle.tv = tv;
  bundle.utterances.resize(static_cast<std::size_t>(S) * U);
  ParallelFor(bundle.utterances.size(), DefaultNumWorkers(),
              [&](std::size_t i) {
    const int s = static_cast<int>(i) / U, u = static_cast<int>(i) % U;
    const int spk = first_speaker + s;
    std::mt19937_64 rng(SubstreamSeed(
        SubstreamSeed(spec.rng_seed, kUttStream + spk), u));
    std::normal_distribution<double> normal(0.0, 1.0);
    std::discrete_distribution<int> pick(weights.begin(), weights.end());

    SynthUtterance &utt = bundle.utterances[i];
    utt.speaker_id = SpeakerName(spk);
    utt.utt_id = UttName(spk, u);
    utt.true_w = offsets[s];
    for (Eigen::Index d = 0; d < D; ++d) utt.true_w(d) += normal(rng);

    // Shifted means m_c + T_c w, C x F.
    Vector shift = tv.t * utt.true_w;
    RowMatrix centers = gmm.means;
    centers += Eigen::Map<const RowMatrix>(shift.data(), C, F);

    RowMatrix frames(L, F);
    for (int t = 0; t < L; ++t) {
      const int c = pick(rng);
      for (Eigen::Index f = 0; f < F; ++f)
        frames(t, f) = centers(c, f) + stddev(c, f) * normal(rng);
    }
    utt.clean = MakeFeatures(std::move(frames), utt.utt_id);
  });
  return bundle;
}

FeatureMatrix Corrupt(const FeatureMatrix &clean, const CorruptionSpec &spec) {
  spec.Validate();
  clean.Validate();
  const Eigen::Index L = clean.NumFrames(), F = clean.Dim();
  std::mt19937_64 rng(spec.rng_seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  RowMatrix noise(L, F);
  if (spec.kind == NoiseKind::kWhite) {
    for (Eigen::Index t = 0; t < L; ++t)
      for (Eigen::Index f = 0; f < F; ++f) noise(t, f) = normal(rng);
  } else {
    // Stationary unit-variance AR(1) along time, independent per dimension.
    const double a = spec.ar_coeff, b = std::sqrt(1.0 - a * a);
    for (Eigen::Index f = 0; f < F; ++f) noise(0, f) = normal(rng);
    for (Eigen::Index t = 1; t < L; ++t)
      for (Eigen::Index f = 0; f < F; ++f)
        noise(t, f) = a * noise(t - 1, f) + b * normal(rng);
  }

  const double e_clean = VoicedEnergy(clean.frames, clean.vad_mask);
  const double e_noise = VoicedEnergy(noise, clean.vad_mask);
  const double ratio = std::pow(10.0, spec.target_snr_db / 10.0);
  double gain = 0.0;
  if (e_clean > 0.0 && e_noise > 0.0 && std::isfinite(ratio))
    gain = std::sqrt(e_clean / (e_noise * ratio));

  FeatureMatrix out = clean;
  if (gain > 0.0) out.frames += gain * noise;
  return out;
}

double MeasureSnrDb(const FeatureMatrix &clean, const FeatureMatrix &noisy) {
  if (clean.NumFrames() != noisy.NumFrames() || clean.Dim() != noisy.Dim())
    throw DimensionError("measure_snr: shape mismatch");
  RowMatrix diff = noisy.frames - clean.frames;
  const double e_noise = VoicedEnergy(diff, clean.vad_mask);
  if (e_noise == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(VoicedEnergy(clean.frames, clean.vad_mask) / e_noise);
}

FeatureMatrix Enhance(const FeatureMatrix &noisy, const GmmModel &gmm,
                      const EnhanceOptions &opts) {
  gmm.Validate();
  noisy.Validate();
  if (noisy.Dim() != gmm.Dim())
    throw DimensionError("enhance: feature dimension does not match the GMM");
  if (opts.noise_mean_iters < 0)
    throw InvalidArgument("enhance: noise_mean_iters must be >= 0");
  const Eigen::Index C = gmm.NumComponents(), F = gmm.Dim();

  // Global mean and variance of the UBM.
  Vector mu = gmm.means.transpose() * gmm.weights;
  RowMatrix second = gmm.vars + gmm.means.cwiseAbs2();
  Vector var = second.transpose() * gmm.weights - mu.cwiseAbs2();

  Vector sum = Vector::Zero(F), sum_sq = Vector::Zero(F);
  double count = 0.0;
  for (Eigen::Index t = 0; t < noisy.NumFrames(); ++t) {
    if (!noisy.Voiced(t)) continue;
    sum += noisy.frames.row(t).transpose();
    sum_sq += noisy.frames.row(t).transpose().cwiseAbs2();
    count += 1.0;
  }
  Vector gain = Vector::Ones(F), offset = Vector::Zero(F);
  if (count >= 2.0) {
    Vector mean = sum / count;
    Vector noisy_var = sum_sq / count - mean.cwiseAbs2();
    for (Eigen::Index f = 0; f < F; ++f)
      if (noisy_var(f) > 0.0) gain(f) = std::min(1.0, var(f) / noisy_var(f));
    if (opts.noise_mean_iters > 0) offset = mean - mu;
  }

  // Maximum-likelihood noise offset under the UBM, x_t - b ~ GMM.
  const GmmScorer scorer(gmm);
  std::vector<double> z(F), post(C);
  for (int it = 0; it < opts.noise_mean_iters && count >= 2.0; ++it) {
    Vector num = Vector::Zero(F), den = Vector::Zero(F);
    for (Eigen::Index t = 0; t < noisy.NumFrames(); ++t) {
      if (!noisy.Voiced(t)) continue;
      for (Eigen::Index f = 0; f < F; ++f)
        z[f] = noisy.frames(t, f) - offset(f);
      scorer.LogLikelihoods(z, post);
      GmmScorer::NormalizeInPlace(post);
      for (Eigen::Index c = 0; c < C; ++c) {
        if (post[c] == 0.0) continue;
        for (Eigen::Index f = 0; f < F; ++f) {
          const double w = post[c] / gmm.vars(c, f);
          num(f) += w * (noisy.frames(t, f) - gmm.means(c, f));
          den(f) += w;
        }
      }
    }
    offset = num.cwiseQuotient(den);
  }

  FeatureMatrix out = noisy;
  for (Eigen::Index t = 0; t < out.NumFrames(); ++t)
    for (Eigen::Index f = 0; f < F; ++f)
      out.frames(t, f) =
          mu(f) + gain(f) * (noisy.frames(t, f) - offset(f) - mu(f));
  return out;
}

UncertaintySequence OracleUncertainty(const FeatureMatrix &clean,
                                      const FeatureMatrix &enhanced) {
  if (clean.NumFrames() != enhanced.NumFrames() ||
      clean.Dim() != enhanced.Dim())
    throw DimensionError("oracle_uncertainty: clean is " +
                         std::to_string(clean.NumFrames()) + "x" +
                         std::to_string(clean.Dim()) + ", enhanced is " +
                         std::to_string(enhanced.NumFrames()) + "x" +
                         std::to_string(enhanced.Dim()));
  UncertaintySequence unc;
  unc.diag_vars = (clean.frames - enhanced.frames).cwiseAbs2();
  unc.utt_id = enhanced.utt_id.empty() ? clean.utt_id : enhanced.utt_id;
  unc.Validate();
  return unc;
}

void WriteCorpus(const std::filesystem::path &dir, const CorpusBundle &bundle) {
  std::filesystem::create_directories(dir / "features");
  std::ofstream manifest(dir / "manifest.tsv");
  if (!manifest)
    throw Error("cannot open '" + (dir / "manifest.tsv").string() + "'");
  std::vector<IVector> true_w;
  for (const auto &utt : bundle.utterances) {
    const std::string rel = "features/" + utt.utt_id + ".uvfm";
    WriteFeatures(dir / rel, utt.clean);
    manifest << utt.utt_id << '\t' << utt.speaker_id << '\t' << rel << '\n';
    true_w.push_back(IVector{utt.true_w, std::nullopt, utt.utt_id});
  }
  if (!manifest) throw Error("write failed for manifest.tsv");
  WriteGmm(dir / "ubm.json", bundle.gmm);
  WriteTv(dir / "tv.uvtv", bundle.tv);
  WriteIvectorsCsv(dir / "true_w.csv", true_w);
}

CorpusBundle ReadCorpus(const std::filesystem::path &dir) {
  CorpusBundle bundle;
  bundle.gmm = ReadGmm(dir / "ubm.json");
  bundle.tv = ReadTv(dir / "tv.uvtv");
  std::map<std::string, Vector> true_w;
  for (auto &iv : ReadIvectorsCsv(dir / "true_w.csv"))
    true_w[iv.utt_id] = std::move(iv.mean);

  std::ifstream manifest(dir / "manifest.tsv");
  if (!manifest)
    throw Error("cannot open '" + (dir / "manifest.tsv").string() + "'");
  std::string line;
  while (std::getline(manifest, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    SynthUtterance utt;
    std::string rel;
    if (!std::getline(ss, utt.utt_id, '\t') ||
        !std::getline(ss, utt.speaker_id, '\t') || !std::getline(ss, rel))
      throw FormatError("manifest.tsv: malformed line '" + line + "'");
    utt.clean = ReadFeatures(dir / rel);
    utt.clean.utt_id = utt.utt_id;
    auto it = true_w.find(utt.utt_id);
    if (it == true_w.end())
      throw FormatError("true_w.csv: no entry for '" + utt.utt_id + "'");
    utt.true_w = it->second;
    bundle.utterances.push_back(std::move(utt));
  }
  return bundle;
}

}  // namespace ivup

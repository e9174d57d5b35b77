// ivup/corpus-synth.h

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

#ifndef IVUP_CORPUS_SYNTH_H_
#define IVUP_CORPUS_SYNTH_H_

// Synthetic corpora drawn from the total-variability generative model, plus
// feature-domain corruption, a simple enhancer and oracle uncertainty.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ivup/common.h"
#include "ivup/frontend.h"
#include "ivup/gmm.h"
#include "ivup/ivector.h"

namespace ivup {

struct GenerativeSpec {
  int num_speakers = 10;
  int utts_per_speaker = 4;
  int frames_per_utt = 200;  // L
  int feature_dim = 39;      // F
  int num_components = 64;   // C
  int ivector_dim = 32;      // D
  // w(u) = speaker_shift_scale * z(speaker) + e(u), z and e standard normal.
  double speaker_shift_scale = 1.0;
  // Per-dimension stddev of T_c w relative to sqrt(Sigma_c), for unit w.
  double loading_scale = 0.5;
  // Stddev of the UBM means in units of the average component stddev.
  double mean_spread = 1.0;
  std::uint64_t rng_seed = 0;

  void Validate() const;
};

struct SynthUtterance {
  std::string utt_id;
  std::string speaker_id;
  FeatureMatrix clean;
  Vector true_w;
};

struct CorpusBundle {
  std::vector<SynthUtterance> utterances;
  GmmModel gmm;
  TvModel tv;
};

enum class NoiseKind { kWhite, kColored };

struct CorruptionSpec {
  double target_snr_db = 5.0;
  NoiseKind kind = NoiseKind::kWhite;
  double ar_coeff = 0.0;  // lag-1 coefficient for kColored, in (-1, 1)
  std::uint64_t rng_seed = 0;

  void Validate() const;
};

/// Seed of the independent substream for item `index` of a stream.
std::uint64_t SubstreamSeed(std::uint64_t seed, std::uint64_t index);

/// Random diagonal GMM whose component means are pairwise at least four
/// average standard deviations apart.
GmmModel SynthUbm(const GenerativeSpec &spec);

/// Random T (entries scaled by sqrt(Sigma_c) * loading_scale / sqrt(D)) with
/// V = Sigma.
TvModel SynthTv(const GenerativeSpec &spec, const GmmModel &gmm);

/// Samples every utterance from m_c + T_c w + N(0, Sigma_c) with c ~ pi.
/// Speakers and utterances are numbered from `first_speaker`, so disjoint
/// speaker sets can be drawn from the same models.
CorpusBundle SynthCorpus(const GenerativeSpec &spec, const GmmModel &gmm,
                         const TvModel &tv, int first_speaker = 0);

/// Adds white or AR(1) noise scaled so that the clean-to-noise energy ratio
/// over voiced frames equals the target SNR.
FeatureMatrix Corrupt(const FeatureMatrix &clean, const CorruptionSpec &spec);

/// Energy ratio (dB) of clean to (noisy - clean) over voiced frames.
double MeasureSnrDb(const FeatureMatrix &clean, const FeatureMatrix &noisy);

struct EnhanceOptions {
  // EM iterations for a constant noise offset b maximising the UBM
  // likelihood of x_t - b; 0 assumes zero-mean noise.
  int noise_mean_iters = 0;
};

/// Per-dimension Wiener-style shrinkage toward the UBM global mean,
/// ybar = mu + g (x - b - mu), with gain g = var_ubm / var_noisy (clipped to
/// (0, 1]) and the noisy variance measured on the utterance's voiced frames.
FeatureMatrix Enhance(const FeatureMatrix &noisy, const GmmModel &gmm,
                      const EnhanceOptions &opts = {});

/// Oracle uncertainty: row t = (clean_t - enhanced_t)^2 elementwise.
UncertaintySequence OracleUncertainty(const FeatureMatrix &clean,
                                      const FeatureMatrix &enhanced);

/// Directory layout: manifest.tsv (utt_id, speaker_id, path),
/// features/<utt>.uvfm, ubm.json, tv.uvtv, true_w.csv.
void WriteCorpus(const std::filesystem::path &dir, const CorpusBundle &bundle);
CorpusBundle ReadCorpus(const std::filesystem::path &dir);

}  // namespace ivup

#endif  // IVUP_CORPUS_SYNTH_H_

// ivup/frontend.h

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

#ifndef IVUP_FRONTEND_H_
#define IVUP_FRONTEND_H_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "ivup/common.h"

namespace ivup {

enum class FeatureKind : std::uint8_t { kGeneric = 0, kMfcc = 1 };

/// An L x F sequence of feature frames with a voice-activity mask.
struct FeatureMatrix {
  RowMatrix frames;
  std::vector<std::uint8_t> vad_mask;  // 1 = voiced; length L
  std::string utt_id;
  double frame_rate_hz = 100.0;
  FeatureKind kind = FeatureKind::kGeneric;
  int log_energy_dim = -1;  // column holding log-energy, -1 if none

  Eigen::Index NumFrames() const { return frames.rows(); }
  Eigen::Index Dim() const { return frames.cols(); }
  Eigen::Index NumVoiced() const;
  bool Voiced(Eigen::Index t) const { return vad_mask[t] != 0; }

  /// Throws if L == 0, the mask length is wrong, or a value is non-finite.
  void Validate() const;
};

/// Wraps a frame matrix with an all-voiced mask.
FeatureMatrix MakeFeatures(RowMatrix frames, std::string utt_id = {});

/// Per-frame diagonal uncertainty covariances; row t is diag of the
/// covariance of the error between enhanced and clean features at frame t.
struct UncertaintySequence {
  RowMatrix diag_vars;
  std::string utt_id;

  Eigen::Index NumFrames() const { return diag_vars.rows(); }
  Eigen::Index Dim() const { return diag_vars.cols(); }

  /// Throws on negative or non-finite entries.
  void Validate() const;
  /// Validate() plus a shape check against the companion features.
  void ValidateAgainst(const FeatureMatrix &fm) const;
};

/// All-zero uncertainty shaped like `fm`.
UncertaintySequence ZeroUncertainty(const FeatureMatrix &fm);

struct MfccConfig {
  int num_ceps = 19;
  bool append_log_energy = true;
  double window_ms = 25.0;
  double hop_ms = 10.0;
  int num_mel_filters = 24;
  int delta_window = 2;
  double sample_rate_hz = 16000.0;
  double preemph = 0.97;
  double low_freq_hz = 20.0;

  int WindowSamples() const;
  int HopSamples() const;
  void Validate() const;
};

/// Static MFCCs c1..c{num_ceps}, followed by the raw log-energy if enabled.
/// Frame count is floor((samples - window) / hop) + 1.
FeatureMatrix ExtractMfcc(std::span<const double> waveform,
                          const MfccConfig &cfg, std::string utt_id = {});

/// Appends regression deltas and delta-deltas (edge frames replicated).
/// Output width is 3 * input width.
FeatureMatrix AppendDeltas(const FeatureMatrix &fm, int delta_window);

/// Variance of the delta features under a frame-independence assumption:
/// the regression filter applied with squared coefficients.
UncertaintySequence AppendDeltaUncertainty(const UncertaintySequence &unc,
                                           int delta_window);

/// Energy-based VAD. A frame is voiced iff its log-energy exceeds the
/// utterance maximum minus `threshold_db` (converted to natural-log units).
FeatureMatrix EnergyVad(const FeatureMatrix &fm, double threshold_db = 30.0);

struct CmvnResult {
  FeatureMatrix features;
  Vector means;
  Vector scales;  // per-dimension standard deviation that was divided out
};

/// Mean/variance normalisation with statistics from voiced frames, applied
/// to all frames. Variances are floored at 1e-8.
CmvnResult Cmvn(const FeatureMatrix &fm);

/// Keeps uncertainties consistent with CMVN: entry (t, f) / scales[f]^2.
UncertaintySequence ScaleUncertainty(const UncertaintySequence &unc,
                                     const Vector &scales);

// Binary containers: little-endian header {magic, u32 version, u64 L, u64 F,
// u32 flags}, row-major float64 payload, then L mask bytes.
// Magic is "UVFM" for features and "UVUN" for uncertainties.
inline constexpr std::uint32_t kFeatureFormatVersion = 1;

void WriteFeatures(std::ostream &os, const FeatureMatrix &fm);
FeatureMatrix ReadFeatures(std::istream &is, std::string utt_id = {});
void WriteFeatures(const std::filesystem::path &path, const FeatureMatrix &fm);
/// The utterance id is taken from the file stem.
FeatureMatrix ReadFeatures(const std::filesystem::path &path);

void WriteUncertainty(std::ostream &os, const UncertaintySequence &unc);
UncertaintySequence ReadUncertainty(std::istream &is, std::string utt_id = {});
void WriteUncertainty(const std::filesystem::path &path,
                      const UncertaintySequence &unc);
UncertaintySequence ReadUncertainty(const std::filesystem::path &path);

/// Mono PCM WAV (16-bit integer or 32-bit float), samples scaled to
/// [-1, 1). Multi-channel files keep channel 0.
struct Waveform {
  std::vector<double> samples;
  double sample_rate_hz = 0.0;
};
Waveform ReadWav(const std::filesystem::path &path);
void WriteWav(const std::filesystem::path &path, const Waveform &wav);

}  // namespace ivup

#endif  // IVUP_FRONTEND_H_

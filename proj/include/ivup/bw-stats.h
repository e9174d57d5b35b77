// ivup/bw-stats.h

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

#ifndef IVUP_BW_STATS_H_
#define IVUP_BW_STATS_H_

// Baum-Welch statistics for the baseline extractor and the three
// uncertainty-propagation variants.
//
//   kStandard        N_c = sum g_t(c),  F_c = sum g_t(c) (y_t - m_c)
//   kUbmUncertain    g from N(ybar | m_c, S_c + Sbar_t),
//                    F_c = sum g_t(c) W_ct (ybar_t - m_c),
//                    W_ct = S_c / (S_c + Sbar_t)
//   kNormalized      N~_c = N_c / V_c,  F~_c = F_c / V_c
//   kFaUncertain     g from N(ybar | m_c, S_c) (not uncertainty-aware),
//                    N~_c = sum g / (V_c + Sbar_t),
//                    F~_c = sum g (ybar - m_c) / (V_c + Sbar_t)
//   kProposed        g as in kUbmUncertain,
//                    N~_c = sum g / (V_c + Sbar_t),
//                    F~_c = sum g W_ct (ybar - m_c) / (V_c + Sbar_t)
//
// All covariances are diagonal, so every N~_c is stored as an F-vector.
// Only voiced frames contribute.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>

#include "ivup/common.h"
#include "ivup/frontend.h"
#include "ivup/gmm.h"

namespace ivup {

enum class StatsVariant : std::uint8_t {
  kStandard = 0,
  kUbmUncertain = 1,
  kNormalized = 2,
  kFaUncertain = 3,
  kProposed = 4,
};

const char *VariantName(StatsVariant v);
StatsVariant VariantFromName(const std::string &name);
/// True for the variants stored as NormalizedStats.
bool IsNormalizedVariant(StatsVariant v);

/// Zeroth-order counts and centralised first-order statistics.
struct BwStats {
  Vector n;          // C
  RowMatrix f_hat;   // C x F
  std::string utt_id;
  StatsVariant variant = StatsVariant::kStandard;

  Eigen::Index NumComponents() const { return n.size(); }
  Eigen::Index Dim() const { return f_hat.cols(); }
  static BwStats Zero(Eigen::Index C, Eigen::Index F, StatsVariant v);
};

/// Statistics already multiplied by the inverse residual covariance.
struct NormalizedStats {
  RowMatrix n_tilde;  // C x F, diagonal of each block
  RowMatrix f_tilde;  // C x F
  std::string utt_id;
  StatsVariant variant = StatsVariant::kNormalized;

  Eigen::Index NumComponents() const { return n_tilde.rows(); }
  Eigen::Index Dim() const { return n_tilde.cols(); }
  static NormalizedStats Zero(Eigen::Index C, Eigen::Index F, StatsVariant v);
};

/// Elementwise W = sigma_c / (sigma_c + sigma_bar), in (0, 1].
Vector WienerGain(const Vector &sigma_c, const Vector &sigma_bar_t);

BwStats AccumulateStandard(const GmmModel &gmm, const FeatureMatrix &fm);

BwStats AccumulateUbmUncertain(const GmmModel &gmm, const FeatureMatrix &fm,
                               const UncertaintySequence &unc);

/// V_c = the GMM covariances (the default residual convention).
NormalizedStats NormalizeStats(const GmmModel &gmm, const BwStats &stats);
/// Explicit residual covariance, C x F.
NormalizedStats NormalizeStats(const RowMatrix &residual_vars,
                               const BwStats &stats);

NormalizedStats AccumulateFaUncertain(const GmmModel &gmm,
                                      const FeatureMatrix &fm,
                                      const UncertaintySequence &unc);
NormalizedStats AccumulateFaUncertain(const GmmModel &gmm,
                                      const RowMatrix &residual_vars,
                                      const FeatureMatrix &fm,
                                      const UncertaintySequence &unc);

NormalizedStats AccumulateProposed(const GmmModel &gmm,
                                   const FeatureMatrix &fm,
                                   const UncertaintySequence &unc);
NormalizedStats AccumulateProposed(const GmmModel &gmm,
                                   const RowMatrix &residual_vars,
                                   const FeatureMatrix &fm,
                                   const UncertaintySequence &unc);

// Lower-level entry points taking the posteriors explicitly. The high-level
// accumulators above are these composed with ComputePosteriors /
// ComputePosteriorsUncertain. Frames [begin, end) are used; unvoiced frames
// are skipped.

BwStats AccumulateFromPosteriors(const GmmModel &gmm, const FeatureMatrix &fm,
                                 const RowMatrix &gammas,
                                 const UncertaintySequence *unc,
                                 StatsVariant variant, Eigen::Index begin,
                                 Eigen::Index end);

/// `wiener` selects the proposed form; without it this is the FA form.
NormalizedStats AccumulateNormalizedFromPosteriors(
    const GmmModel &gmm, const RowMatrix &residual_vars,
    const FeatureMatrix &fm, const RowMatrix &gammas,
    const UncertaintySequence &unc, bool wiener, Eigen::Index begin,
    Eigen::Index end);

/// Sums two statistics of the same variant and shape.
BwStats MergeStats(const BwStats &a, const BwStats &b);
NormalizedStats MergeStats(const NormalizedStats &a, const NormalizedStats &b);

/// 1 - cos(vec(F_a), vec(F_b)), in [0, 2].
double FstatCosine(const BwStats &a, const BwStats &b);

// Binary container: "UVST", u32 version, u8 variant, u64 C, u64 F, then the
// zeroth-order array (C values, or C x F for normalized variants) and the
// C x F first-order array, float64 little-endian.
inline constexpr std::uint32_t kStatsFormatVersion = 1;

void WriteStats(std::ostream &os, const BwStats &stats);
void WriteStats(std::ostream &os, const NormalizedStats &stats);
void WriteStats(const std::filesystem::path &path, const BwStats &stats);
void WriteStats(const std::filesystem::path &path,
                const NormalizedStats &stats);

/// Either kind of statistics as read from a container.
struct AnyStats {
  StatsVariant variant;
  BwStats raw;             // valid when !IsNormalizedVariant(variant)
  NormalizedStats normed;  // valid when IsNormalizedVariant(variant)
};
AnyStats ReadStats(std::istream &is, std::string utt_id = {});
AnyStats ReadStats(const std::filesystem::path &path);

}  // namespace ivup

#endif  // IVUP_BW_STATS_H_

// ivup/ivector.h

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

#ifndef IVUP_IVECTOR_H_
#define IVUP_IVECTOR_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ivup/bw-stats.h"
#include "ivup/common.h"
#include "ivup/frontend.h"
#include "ivup/gmm.h"

namespace ivup {

/// Total-variability model: supervector = m + T w + residual, with T stored
/// as CF x D (component c owns rows [cF, cF + F)) and the residual covariance
/// V as C x F diagonals.
struct TvModel {
  Matrix t;
  RowMatrix v_diag;

  Eigen::Index NumComponents() const { return v_diag.rows(); }
  Eigen::Index FeatDim() const { return v_diag.cols(); }
  Eigen::Index IvectorDim() const { return t.cols(); }
  auto Block(Eigen::Index c) const {
    return t.middleRows(c * FeatDim(), FeatDim());
  }

  void Validate() const;
};

/// Posterior mean of w, optionally with its precision I + T' N~ T.
struct IVector {
  Vector mean;
  std::optional<Matrix> precision;
  std::string utt_id;
};

/// Solves a symmetric positive-definite system by Cholesky. If the
/// factorisation fails a ridge of 1e-10 * trace / D is added (and grown)
/// until it succeeds; the event is logged.
Vector SolveSpd(const Matrix &a, const Vector &b);

/// Shares the per-component products T_c' V_c^-1 T_c between utterances.
class IvectorExtractor {
 public:
  explicit IvectorExtractor(TvModel tv);

  const TvModel &Model() const { return tv_; }

  /// (I + T' N~ T)^-1 T' F~ with N~ block-diagonal. This single solver is
  /// shared by the baseline and every uncertainty variant.
  IVector Extract(const NormalizedStats &stats,
                  bool with_precision = false) const;

  /// The same posterior mean assembled from raw statistics:
  /// (I + sum_c N_c T_c' V_c^-1 T_c)^-1 T' V^-1 F.
  IVector ExtractFromRaw(const BwStats &stats,
                         bool with_precision = false) const;

 private:
  TvModel tv_;
  std::vector<Matrix> t_vinv_t_;  // C matrices, D x D
};

IVector Extract(const TvModel &tv, const NormalizedStats &stats,
                bool with_precision = false);

// Full extraction paths, one per method. Statistics are normalised by tv.v_diag.
IVector ExtractBaseline(const TvModel &tv, const GmmModel &gmm,
                        const FeatureMatrix &fm);
IVector ExtractFaUncertain(const TvModel &tv, const GmmModel &gmm,
                           const FeatureMatrix &fm,
                           const UncertaintySequence &unc);
IVector ExtractUbmUncertain(const TvModel &tv, const GmmModel &gmm,
                            const FeatureMatrix &fm,
                            const UncertaintySequence &unc);
IVector ExtractProposed(const TvModel &tv, const GmmModel &gmm,
                        const FeatureMatrix &fm,
                        const UncertaintySequence &unc);

struct TvTrainOptions {
  int ivector_dim = 32;
  int num_iters = 10;
  std::uint64_t seed = 0;
  double init_stddev = 0.01;
  int num_workers = 1;
};

struct TvTrainResult {
  TvModel tv;
  // Average per-utterance log-likelihood (up to a T-independent constant)
  // before each update, then for the final model: num_iters + 1 entries.
  std::vector<double> objective_history;
};

/// EM for T with V fixed to the GMM covariances. Expects kStandard stats.
TvTrainResult TrainTv(std::span<const BwStats> stats, const GmmModel &gmm,
                      const TvTrainOptions &opts);

/// Principal angles (radians, ascending) between the column spaces of a and b.
Vector PrincipalAngles(const Matrix &a, const Matrix &b);

// Binary TV file: "UVTV", u32 version, u64 C, u64 F, u64 D, T row-major
// (CF x D), then V (C x F), float64 little-endian.
inline constexpr std::uint32_t kTvFormatVersion = 1;
void WriteTv(const std::filesystem::path &path, const TvModel &tv);
TvModel ReadTv(const std::filesystem::path &path);

/// CSV with header utt_id,w_0,...,w_{D-1}; values written round-trip exact.
void WriteIvectorsCsv(const std::filesystem::path &path,
                      std::span<const IVector> ivectors);
std::vector<IVector> ReadIvectorsCsv(const std::filesystem::path &path);

}  // namespace ivup

#endif  // IVUP_IVECTOR_H_

// ivup/gmm.h

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

#ifndef IVUP_GMM_H_
#define IVUP_GMM_H_

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "ivup/common.h"
#include "ivup/frontend.h"

namespace ivup {

/// Diagonal-covariance GMM used as the universal background model.
struct GmmModel {
  Vector weights;   // C
  RowMatrix means;  // C x F
  RowMatrix vars;   // C x F, diagonal covariances

  Eigen::Index NumComponents() const { return weights.size(); }
  Eigen::Index Dim() const { return means.cols(); }

  /// Checks shapes, sum(weights) == 1 (1e-12), positive finite variances.
  void Validate() const;
};

/// gammas is L x C (rows sum to one); loglik(t) = log p(y_t).
struct FramePosteriors {
  RowMatrix gammas;
  Vector loglik;
};

/// Fills inv_vars (C x F) and log_norms (C) for log pi_c + log N(.|m_c, var_c)
/// evaluation. Every posterior path goes through this one routine, which is
/// what makes the zero-uncertainty paths bit-identical to the plain ones.
void ComputeComponentTerms(const Vector &weights, const RowMatrix &vars,
                           RowMatrix &inv_vars, Vector &log_norms);

/// Per-component log-likelihood evaluation with cached terms.
class GmmScorer {
 public:
  explicit GmmScorer(const GmmModel &gmm);

  const GmmModel &Model() const { return gmm_; }

  /// out[c] = log pi_c + log N(y | m_c, Sigma_c).
  void LogLikelihoods(std::span<const double> y, std::span<double> out) const;

  /// Same with Sigma_c replaced by Sigma_c + diag(unc_var). `scratch_inv`
  /// must hold C x F values and `scratch_norm` C values.
  void LogLikelihoodsUncertain(std::span<const double> y,
                               std::span<const double> unc_var,
                               RowMatrix &scratch_vars,
                               RowMatrix &scratch_inv, Vector &scratch_norm,
                               std::span<double> out) const;

  /// Normalises log-likelihoods in place into posteriors; returns log-sum.
  static double NormalizeInPlace(std::span<double> loglik);

 private:
  GmmModel gmm_;
  RowMatrix inv_vars_;
  Vector log_norms_;
};

/// Component posteriors of every frame (voiced or not).
FramePosteriors ComputePosteriors(const GmmModel &gmm, const FeatureMatrix &fm);

/// Posteriors of enhanced features with covariances inflated by the frame
/// uncertainty: N(ybar_t | m_c, Sigma_c + Sigma_bar_t).
FramePosteriors ComputePosteriorsUncertain(const GmmModel &gmm,
                                           const FeatureMatrix &fm,
                                           const UncertaintySequence &unc);

/// Additive EM sufficient statistics; Merge() is associative.
struct GmmAccumulator {
  Vector occupancy;   // C
  RowMatrix first;    // C x F, sum gamma * y
  RowMatrix second;   // C x F, sum gamma * y^2
  double total_loglik = 0.0;
  double num_frames = 0.0;

  GmmAccumulator() = default;
  GmmAccumulator(Eigen::Index num_comp, Eigen::Index dim);

  void AccumulateFrames(const GmmScorer &scorer, const RowMatrix &frames,
                        Eigen::Index begin, Eigen::Index end);
  void Merge(const GmmAccumulator &other);
};

struct UbmTrainOptions {
  int num_components = 64;
  int num_iters = 10;
  int kmeans_iters = 2;
  std::uint64_t seed = 0;
  double var_floor = kVarianceFloor;
  int num_workers = 1;
  // k-means++ seeding runs on at most this many frames.
  Eigen::Index max_seed_frames = 20000;
};

struct UbmTrainResult {
  GmmModel gmm;
  // Average per-frame log-likelihood before each EM update, followed by the
  // value for the final model (num_iters + 1 entries).
  std::vector<double> loglik_history;
};

/// k-means++ seeding, a few k-means passes, then EM on the voiced frames.
/// Needs at least 10 * C voiced frames.
UbmTrainResult TrainUbm(std::span<const FeatureMatrix> features,
                        const UbmTrainOptions &opts);

/// Structured-text model file (JSON) with format version, C, F, weights,
/// means and variances.
void WriteGmm(const std::filesystem::path &path, const GmmModel &gmm);
GmmModel ReadGmm(const std::filesystem::path &path);
std::string GmmToJson(const GmmModel &gmm);
GmmModel GmmFromJson(const std::string &text);

}  // namespace ivup

#endif  // IVUP_GMM_H_

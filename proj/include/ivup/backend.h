// ivup/backend.h

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

#ifndef IVUP_BACKEND_H_
#define IVUP_BACKEND_H_

// I-vector post-processing (centering, whitening, length normalisation, LDA)
// and trial scoring with a two-covariance Gaussian PLDA or cosine similarity.

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "ivup/common.h"

namespace ivup {

struct WhitenTransform {
  Vector mean;
  Matrix transform;  // inverse square root of the training covariance

  Vector Apply(const Vector &v) const;
};

/// Symmetric (eigendecomposition) whitening. A ridge of 1e-8 * trace / D is
/// added when the covariance is near singular.
WhitenTransform FitWhitener(std::span<const Vector> data);

Vector LengthNormalize(const Vector &v);

struct LdaTransform {
  Matrix projection;   // D x R, columns have unit within-class norm
  Vector eigenvalues;  // R, descending

  Vector Apply(const Vector &v) const { return projection.transpose() * v; }
};

/// Columns by descending generalized eigenvalue of (S_b, S_w); each column's
/// first nonzero entry is positive. R is capped at num_classes - 1 with a
/// warning; R > D is an error.
LdaTransform FitLda(std::span<const Vector> data, std::span<const int> labels,
                    int dim);

/// x = y + e with y ~ N(mu, between_cov) per speaker, e ~ N(0, within_cov).
struct PldaModel {
  Vector mu;
  Matrix between_cov;
  Matrix within_cov;

  Eigen::Index Dim() const { return mu.size(); }
  void Validate() const;
};

struct PldaTrainResult {
  PldaModel model;
  // Total log-likelihood before each update and for the final model.
  std::vector<double> loglik_history;
};

/// EM for the two-covariance model; mu is fixed at the data mean.
PldaTrainResult TrainPlda(std::span<const Vector> data,
                          std::span<const int> labels, int num_iters);

/// log p(a, b | same speaker) - log p(a, b | different speakers).
class PldaScorer {
 public:
  explicit PldaScorer(const PldaModel &model);
  double Score(const Vector &enroll, const Vector &test) const;

 private:
  Vector mu_;
  Matrix diag_term_;  // T^-1 - P
  Matrix cross_;      // Q
  double offset_ = 0.0;
};

double ScorePlda(const PldaModel &model, const Vector &enroll,
                 const Vector &test);

double CosineScore(const Vector &a, const Vector &b);

struct BackendConfig {
  int lda_dim = 0;  // 0: min(D, num_speakers - 1)
  int plda_iters = 10;
};

/// whiten -> length-normalise -> LDA -> PLDA.
struct BackendModel {
  WhitenTransform whiten;
  LdaTransform lda;
  PldaModel plda;

  Vector Project(const Vector &ivector) const;
};

BackendModel TrainBackend(std::span<const Vector> ivectors,
                          std::span<const int> labels,
                          const BackendConfig &cfg,
                          std::vector<double> *plda_history = nullptr);

std::string BackendToJson(const BackendModel &model);
BackendModel BackendFromJson(const std::string &text);
void WriteBackend(const std::filesystem::path &path, const BackendModel &model);
BackendModel ReadBackend(const std::filesystem::path &path);

}  // namespace ivup

#endif  // IVUP_BACKEND_H_

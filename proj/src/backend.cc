// backend.cc

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

#include "ivup/backend.h"

#include <cmath>
#include <map>
#include <numbers>

namespace ivup {

namespace {

void CheckData(std::span<const Vector> data, const char *what) {
  if (data.empty()) throw InvalidArgument(std::string(what) + ": no data");
  const Eigen::Index D = data.front().size();
  if (D == 0) throw InvalidArgument(std::string(what) + ": empty vectors");
  for (const auto &v : data) {
    if (v.size() != D)
      throw DimensionError(std::string(what) + ": vectors differ in size");
    CheckFinite(v, what);
  }
}

// Maps arbitrary labels to 0..K-1 in ascending label order.
std::vector<int> ClassIndex(std::span<const int> labels, int *num_classes) {
  std::map<int, int> ids;
  for (int l : labels) ids.emplace(l, 0);
  int k = 0;
  for (auto &kv : ids) kv.second = k++;
  std::vector<int> out;
  out.reserve(labels.size());
  for (int l : labels) out.push_back(ids[l]);
  *num_classes = k;
  return out;
}

Matrix Symmetrize(const Matrix &m) { return 0.5 * (m + m.transpose()); }

double LogDetSpd(const Matrix &m, const char *what) {
  Eigen::LLT<Matrix> llt(m);
  if (llt.info() != Eigen::Success)
    throw NonFiniteError(std::string(what) + ": matrix is not positive definite");
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

Matrix InverseSpd(const Matrix &m, const char *what) {
  Eigen::LLT<Matrix> llt(m);
  if (llt.info() != Eigen::Success)
    throw NonFiniteError(std::string(what) + ": matrix is not positive definite");
  return Symmetrize(llt.solve(Matrix::Identity(m.rows(), m.cols())));
}

}  // namespace

Vector WhitenTransform::Apply(const Vector &v) const {
  if (v.size() != mean.size())
    throw DimensionError("whitener: vector dimension mismatch");
  return transform * (v - mean);
}

WhitenTransform FitWhitener(std::span<const Vector> data) {
  CheckData(data, "fit_whitener");
  if (data.size() < 2)
    throw InsufficientDataError("fit_whitener needs at least 2 vectors");
  const Eigen::Index D = data.front().size();
  const double n = static_cast<double>(data.size());
  WhitenTransform w;
  w.mean = Vector::Zero(D);
  for (const auto &v : data) w.mean += v;
  w.mean /= n;
  Matrix cov = Matrix::Zero(D, D);
  for (const auto &v : data) {
    Vector d = v - w.mean;
    cov.selfadjointView<Eigen::Lower>().rankUpdate(d);
  }
  cov = Matrix(cov.selfadjointView<Eigen::Lower>()) / n;

  Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
  Vector vals = eig.eigenvalues();
  const double ridge = 1e-8 * std::max(cov.trace() / D, 1e-300);
  if (vals.minCoeff() <= ridge) {
    LogWarning("fit_whitener: near-singular covariance, adding ridge");
    vals.array() += ridge;
  }
  w.transform = eig.eigenvectors() * vals.cwiseInverse().cwiseSqrt().asDiagonal() *
                eig.eigenvectors().transpose();
  return w;
}

Vector LengthNormalize(const Vector &v) {
  CheckFinite(v, "length_normalize");
  const double norm = v.norm();
  if (norm == 0.0) throw InvalidArgument("length_normalize: zero vector");
  return v / norm;
}

LdaTransform FitLda(std::span<const Vector> data, std::span<const int> labels,
                    int dim) {
  CheckData(data, "fit_lda");
  if (labels.size() != data.size())
    throw DimensionError("fit_lda: one label per vector required");
  int K = 0;
  std::vector<int> cls = ClassIndex(labels, &K);
  const Eigen::Index D = data.front().size();
  if (K < 2) throw InsufficientDataError("fit_lda needs at least 2 classes");
  if (dim < 1 || dim > D)
    throw InvalidArgument("fit_lda: requested dimension " +
                          std::to_string(dim) + " not in [1, " +
                          std::to_string(D) + "]");
  if (dim > K - 1) {
    LogWarning("fit_lda: requested dimension " + std::to_string(dim) +
               " exceeds num_classes - 1; capping at " + std::to_string(K - 1));
    dim = K - 1;
  }

  const double n = static_cast<double>(data.size());
  std::vector<Vector> class_mean(K, Vector::Zero(D));
  std::vector<double> count(K, 0.0);
  Vector mean = Vector::Zero(D);
  for (std::size_t i = 0; i < data.size(); ++i) {
    class_mean[cls[i]] += data[i];
    count[cls[i]] += 1.0;
    mean += data[i];
  }
  mean /= n;
  for (int k = 0; k < K; ++k) class_mean[k] /= count[k];

  Matrix sw = Matrix::Zero(D, D), sb = Matrix::Zero(D, D);
  for (std::size_t i = 0; i < data.size(); ++i) {
    Vector d = data[i] - class_mean[cls[i]];
    sw.noalias() += d * d.transpose();
  }
  for (int k = 0; k < K; ++k) {
    Vector d = class_mean[k] - mean;
    sb.noalias() += count[k] * d * d.transpose();
  }
  sw = Symmetrize(sw / n);
  sb = Symmetrize(sb / n);

  Eigen::LLT<Matrix> llt(sw);
  const double ridge_base = std::max(sw.trace() / D, 1e-300);
  for (double ridge = 1e-8 * ridge_base; llt.info() != Eigen::Success;
       ridge *= 10.0) {
    LogWarning("fit_lda: singular within-class scatter, adding ridge");
    sw += ridge * Matrix::Identity(D, D);
    llt.compute(sw);
  }

  Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> ges(sb, sw);
  if (ges.info() != Eigen::Success)
    throw NonFiniteError("fit_lda: generalized eigenproblem failed");
  LdaTransform lda;
  lda.projection.resize(D, dim);
  lda.eigenvalues.resize(dim);
  for (int r = 0; r < dim; ++r) {
    const Eigen::Index src = D - 1 - r;  // ascending order from the solver
    Vector col = ges.eigenvectors().col(src);
    for (Eigen::Index i = 0; i < D; ++i) {
      if (std::abs(col(i)) > 1e-14) {
        if (col(i) < 0.0) col = -col;
        break;
      }
    }
    lda.projection.col(r) = col;
    lda.eigenvalues(r) = ges.eigenvalues()(src);
  }
  return lda;
}

void PldaModel::Validate() const {
  const Eigen::Index R = mu.size();
  if (R == 0) throw InvalidArgument("PLDA model is empty");
  if (between_cov.rows() != R || between_cov.cols() != R ||
      within_cov.rows() != R || within_cov.cols() != R)
    throw DimensionError("PLDA covariance shapes do not match mu");
  CheckFinite(mu, "PLDA mean");
  CheckFinite(between_cov, "PLDA between-class covariance");
  CheckFinite(within_cov, "PLDA within-class covariance");
  if ((between_cov - between_cov.transpose()).cwiseAbs().maxCoeff() > 1e-10)
    throw InvalidArgument("PLDA between-class covariance is not symmetric");
  if ((within_cov - within_cov.transpose()).cwiseAbs().maxCoeff() > 1e-10)
    throw InvalidArgument("PLDA within-class covariance is not symmetric");
  Eigen::LLT<Matrix> llt(within_cov);
  if (llt.info() != Eigen::Success)
    throw InvalidArgument("PLDA within-class covariance is not positive definite");
}

namespace {

struct SpeakerGroup {
  std::vector<std::size_t> members;
  Vector sum;  // sum of (x - mu)
};

// E-step for one speaker plus its log-likelihood under the current model.
struct SpeakerPosterior {
  Vector mean;  // posterior mean of y - mu
  Matrix cov;   // posterior covariance
  double loglik = 0.0;
};

SpeakerPosterior PldaEStep(const SpeakerGroup &g, std::span<const Vector> data,
                           const Vector &mu, const Matrix &b, const Matrix &w,
                           const Matrix &w_inv, double logdet_w) {
  const Eigen::Index R = mu.size();
  const double n = static_cast<double>(g.members.size());
  // Posterior covariance (B^-1 + n W^-1)^-1 = B - n B (W + n B)^-1 B, which
  // stays valid for singular B.
  Matrix m = Symmetrize(w + n * b);
  Eigen::LLT<Matrix> llt(m);
  if (llt.info() != Eigen::Success)
    throw NonFiniteError("PLDA E-step: W + nB is not positive definite");
  SpeakerPosterior post;
  post.cov = Symmetrize(b - n * b * llt.solve(b));
  Vector w_inv_s = w_inv * g.sum;
  post.mean = post.cov * w_inv_s;

  double quad = 0.0;
  for (std::size_t i : g.members) {
    Vector d = data[i] - mu;
    quad += d.dot(w_inv * d);
  }
  const double logdet_m = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  post.loglik = -0.5 * n * R * std::log(2.0 * std::numbers::pi) -
                0.5 * (n - 1.0) * logdet_w - 0.5 * logdet_m - 0.5 * quad +
                0.5 * w_inv_s.dot(post.cov * w_inv_s);
  return post;
}

}  // namespace

PldaTrainResult TrainPlda(std::span<const Vector> data,
                          std::span<const int> labels, int num_iters) {
  CheckData(data, "train_plda");
  if (labels.size() != data.size())
    throw DimensionError("train_plda: one label per vector required");
  if (num_iters < 0) throw InvalidArgument("train_plda: negative iterations");
  int S = 0;
  std::vector<int> cls = ClassIndex(labels, &S);
  if (S < 2) throw InsufficientDataError("train_plda needs at least 2 speakers");
  const Eigen::Index R = data.front().size();
  const double N = static_cast<double>(data.size());

  PldaTrainResult result;
  PldaModel &model = result.model;
  model.mu = Vector::Zero(R);
  for (const auto &v : data) model.mu += v;
  model.mu /= N;

  std::vector<SpeakerGroup> groups(S);
  for (auto &g : groups) g.sum = Vector::Zero(R);
  for (std::size_t i = 0; i < data.size(); ++i) {
    groups[cls[i]].members.push_back(i);
    groups[cls[i]].sum += data[i] - model.mu;
  }
  bool any_repeat = false;
  for (const auto &g : groups) any_repeat |= g.members.size() >= 2;
  if (!any_repeat)
    LogWarning("train_plda: no speaker has two utterances; within-class "
               "covariance is not identifiable");

  // Initialise from the scatter of speaker means and the residual scatter.
  Matrix total = Matrix::Zero(R, R), between = Matrix::Zero(R, R);
  for (const auto &v : data) {
    Vector d = v - model.mu;
    total.noalias() += d * d.transpose();
  }
  total /= N;
  for (const auto &g : groups) {
    Vector m = g.sum / static_cast<double>(g.members.size());
    between.noalias() += static_cast<double>(g.members.size()) * m * m.transpose();
  }
  between /= N;
  const double floor = 1e-6 * std::max(total.trace() / R, 1e-300);
  Matrix within = Symmetrize(total - between);
  if (!any_repeat) within = 0.5 * total;
  model.within_cov = within + floor * Matrix::Identity(R, R);
  model.between_cov = Symmetrize(between);

  std::vector<SpeakerPosterior> posts(S);
  auto estep = [&]() {
    Matrix w_inv = InverseSpd(model.within_cov, "train_plda");
    const double logdet_w = LogDetSpd(model.within_cov, "train_plda");
    double total_ll = 0.0;
    for (int s = 0; s < S; ++s) {
      posts[s] = PldaEStep(groups[s], data, model.mu, model.between_cov,
                           model.within_cov, w_inv, logdet_w);
      total_ll += posts[s].loglik;
    }
    return total_ll;
  };

  for (int it = 0; it < num_iters; ++it) {
    result.loglik_history.push_back(estep());
    Matrix b = Matrix::Zero(R, R), w = Matrix::Zero(R, R);
    for (int s = 0; s < S; ++s) {
      const auto &p = posts[s];
      b += p.cov + p.mean * p.mean.transpose();
      w += static_cast<double>(groups[s].members.size()) * p.cov;
      for (std::size_t i : groups[s].members) {
        Vector r = data[i] - model.mu - p.mean;
        w.noalias() += r * r.transpose();
      }
    }
    model.between_cov = Symmetrize(b / S);
    model.within_cov = Symmetrize(w / N);
  }
  result.loglik_history.push_back(estep());
  model.Validate();
  return result;
}

PldaScorer::PldaScorer(const PldaModel &model) {
  model.Validate();
  const Matrix &b = model.between_cov;
  Matrix t = Symmetrize(b + model.within_cov);
  Matrix t_inv = InverseSpd(t, "score_plda");
  // Same-speaker joint covariance [[T, B], [B, T]] has inverse [[P, Q], [Q, P]]
  // with P = (T - B T^-1 B)^-1 and Q = -T^-1 B P.
  Matrix schur = Symmetrize(t - b * t_inv * b);
  Matrix p = InverseSpd(schur, "score_plda");
  cross_ = Symmetrize(-t_inv * b * p);
  diag_term_ = Symmetrize(t_inv - p);
  mu_ = model.mu;
  offset_ = 0.5 * LogDetSpd(t, "score_plda") - 0.5 * LogDetSpd(schur, "score_plda");
}

double PldaScorer::Score(const Vector &enroll, const Vector &test) const {
  if (enroll.size() != mu_.size() || test.size() != mu_.size())
    throw DimensionError("score_plda: vector dimension mismatch");
  CheckFinite(enroll, "score_plda enroll vector");
  CheckFinite(test, "score_plda test vector");
  Vector a = enroll - mu_, b = test - mu_;
  const double cross = 0.5 * (a.dot(cross_ * b) + b.dot(cross_ * a));
  return 0.5 * a.dot(diag_term_ * a) + 0.5 * b.dot(diag_term_ * b) - cross +
         offset_;
}

double ScorePlda(const PldaModel &model, const Vector &enroll,
                 const Vector &test) {
  return PldaScorer(model).Score(enroll, test);
}

double CosineScore(const Vector &a, const Vector &b) {
  if (a.size() != b.size())
    throw DimensionError("cosine_score: vector dimension mismatch");
  CheckFinite(a, "cosine_score");
  CheckFinite(b, "cosine_score");
  const double na = a.norm(), nb = b.norm();
  if (na == 0.0 || nb == 0.0)
    throw InvalidArgument("cosine_score: zero vector");
  return a.dot(b) / (na * nb);
}

Vector BackendModel::Project(const Vector &ivector) const {
  return lda.Apply(LengthNormalize(whiten.Apply(ivector)));
}

BackendModel TrainBackend(std::span<const Vector> ivectors,
                          std::span<const int> labels,
                          const BackendConfig &cfg,
                          std::vector<double> *plda_history) {
  CheckData(ivectors, "train_backend");
  BackendModel model;
  model.whiten = FitWhitener(ivectors);
  std::vector<Vector> normed;
  normed.reserve(ivectors.size());
  for (const auto &v : ivectors)
    normed.push_back(LengthNormalize(model.whiten.Apply(v)));

  int num_classes = 0;
  ClassIndex(labels, &num_classes);
  const int D = static_cast<int>(ivectors.front().size());
  const int dim = cfg.lda_dim > 0 ? cfg.lda_dim
                                  : std::max(1, std::min(D, num_classes - 1));
  model.lda = FitLda(normed, labels, dim);

  std::vector<Vector> projected;
  projected.reserve(normed.size());
  for (const auto &v : normed) projected.push_back(model.lda.Apply(v));
  auto plda = TrainPlda(projected, labels, cfg.plda_iters);
  model.plda = std::move(plda.model);
  if (plda_history) *plda_history = std::move(plda.loglik_history);
  return model;
}

}  // namespace ivup

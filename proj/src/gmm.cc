// gmm.cc

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

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "ivup/gmm.h"
#include "ivup/kernels.h"
#include "ivup/parallel.h"

namespace ivup {

void GmmModel::Validate() const {
  const Eigen::Index C = weights.size();
  if (C == 0 || means.cols() == 0)
    throw InvalidArgument("GMM has no components or zero dimension");
  if (means.rows() != C || vars.rows() != C || vars.cols() != means.cols())
    throw DimensionError("GMM weight/mean/variance shapes disagree");
  CheckFinite(weights, "GMM weights");
  CheckFinite(means, "GMM means");
  CheckFinite(vars, "GMM variances");
  if ((weights.array() < 0.0).any())
    throw InvalidArgument("GMM has a negative weight");
  if (std::abs(weights.sum() - 1.0) > 1e-12)
    throw InvalidArgument("GMM weights do not sum to one");
  if ((vars.array() <= 0.0).any())
    throw InvalidArgument("GMM has a non-positive variance");
}

void ComputeComponentTerms(const Vector &weights, const RowMatrix &vars,
                           RowMatrix &inv_vars, Vector &log_norms) {
  const Eigen::Index C = vars.rows(), F = vars.cols();
  const double log_2pi = std::log(2.0 * std::numbers::pi);
  inv_vars.resize(C, F);
  log_norms.resize(C);
  for (Eigen::Index c = 0; c < C; ++c) {
    double logdet = 0.0;
    for (Eigen::Index f = 0; f < F; ++f) {
      logdet += std::log(vars(c, f));
      inv_vars(c, f) = 1.0 / vars(c, f);
    }
    log_norms(c) = std::log(weights(c)) - 0.5 * (F * log_2pi + logdet);
  }
}

GmmScorer::GmmScorer(const GmmModel &gmm) : gmm_(gmm) {
  gmm_.Validate();
  ComputeComponentTerms(gmm_.weights, gmm_.vars, inv_vars_, log_norms_);
}

void GmmScorer::LogLikelihoods(std::span<const double> y,
                               std::span<double> out) const {
  kernels::Active().diag_gauss_loglik(y.data(), gmm_.means.data(),
                                      inv_vars_.data(), log_norms_.data(),
                                      gmm_.NumComponents(), gmm_.Dim(),
                                      out.data());
}

void GmmScorer::LogLikelihoodsUncertain(std::span<const double> y,
                                        std::span<const double> unc_var,
                                        RowMatrix &scratch_vars,
                                        RowMatrix &scratch_inv,
                                        Vector &scratch_norm,
                                        std::span<double> out) const {
  Eigen::Map<const Eigen::RowVectorXd> u(unc_var.data(), unc_var.size());
  scratch_vars = gmm_.vars.rowwise() + u;
  ComputeComponentTerms(gmm_.weights, scratch_vars, scratch_inv, scratch_norm);
  kernels::Active().diag_gauss_loglik(y.data(), gmm_.means.data(),
                                      scratch_inv.data(), scratch_norm.data(),
                                      gmm_.NumComponents(), gmm_.Dim(),
                                      out.data());
}

double GmmScorer::NormalizeInPlace(std::span<double> loglik) {
  double max = -std::numeric_limits<double>::infinity();
  for (double v : loglik) max = std::max(max, v);
  if (!std::isfinite(max))
    throw NonFiniteError("frame has no finite component log-likelihood");
  double sum = 0.0;
  for (double &v : loglik) {
    v = std::exp(v - max);
    sum += v;
  }
  const double inv = 1.0 / sum;
  for (double &v : loglik) v *= inv;
  return max + std::log(sum);
}

namespace {

void CheckDims(const GmmModel &gmm, const FeatureMatrix &fm) {
  if (fm.Dim() != gmm.Dim())
    throw DimensionError("feature dimension " + std::to_string(fm.Dim()) +
                         " does not match GMM dimension " +
                         std::to_string(gmm.Dim()));
  fm.Validate();
}

}  // namespace

FramePosteriors ComputePosteriors(const GmmModel &gmm, const FeatureMatrix &fm) {
  CheckDims(gmm, fm);
  GmmScorer scorer(gmm);
  const Eigen::Index L = fm.NumFrames(), C = gmm.NumComponents();
  FramePosteriors post{RowMatrix(L, C), Vector(L)};
  for (Eigen::Index t = 0; t < L; ++t) {
    std::span<double> row(post.gammas.row(t).data(), C);
    scorer.LogLikelihoods({fm.frames.row(t).data(), size_t(fm.Dim())}, row);
    post.loglik(t) = GmmScorer::NormalizeInPlace(row);
  }
  return post;
}

FramePosteriors ComputePosteriorsUncertain(const GmmModel &gmm,
                                           const FeatureMatrix &fm,
                                           const UncertaintySequence &unc) {
  CheckDims(gmm, fm);
  unc.ValidateAgainst(fm);
  GmmScorer scorer(gmm);
  const Eigen::Index L = fm.NumFrames(), C = gmm.NumComponents(),
                     F = gmm.Dim();
  FramePosteriors post{RowMatrix(L, C), Vector(L)};
  RowMatrix vars, inv;
  Vector norms;
  for (Eigen::Index t = 0; t < L; ++t) {
    std::span<double> row(post.gammas.row(t).data(), C);
    scorer.LogLikelihoodsUncertain({fm.frames.row(t).data(), size_t(F)},
                                   {unc.diag_vars.row(t).data(), size_t(F)},
                                   vars, inv, norms, row);
    post.loglik(t) = GmmScorer::NormalizeInPlace(row);
  }
  return post;
}

GmmAccumulator::GmmAccumulator(Eigen::Index num_comp, Eigen::Index dim)
    : occupancy(Vector::Zero(num_comp)),
      first(RowMatrix::Zero(num_comp, dim)),
      second(RowMatrix::Zero(num_comp, dim)) {}

void GmmAccumulator::AccumulateFrames(const GmmScorer &scorer,
                                      const RowMatrix &frames,
                                      Eigen::Index begin, Eigen::Index end) {
  const Eigen::Index C = occupancy.size(), F = first.cols();
  const auto &k = kernels::Active();
  std::vector<double> gamma(C), sq(F);
  for (Eigen::Index t = begin; t < end; ++t) {
    const double *y = frames.row(t).data();
    scorer.LogLikelihoods({y, size_t(F)}, gamma);
    total_loglik += GmmScorer::NormalizeInPlace(gamma);
    num_frames += 1.0;
    for (Eigen::Index f = 0; f < F; ++f) sq[f] = y[f] * y[f];
    for (Eigen::Index c = 0; c < C; ++c) {
      const double g = gamma[c];
      if (g == 0.0) continue;
      occupancy(c) += g;
      k.axpy(g, y, first.row(c).data(), F);
      k.axpy(g, sq.data(), second.row(c).data(), F);
    }
  }
}

void GmmAccumulator::Merge(const GmmAccumulator &other) {
  if (other.occupancy.size() != occupancy.size() ||
      other.first.cols() != first.cols())
    throw DimensionError("cannot merge GMM accumulators of different shape");
  occupancy += other.occupancy;
  first += other.first;
  second += other.second;
  total_loglik += other.total_loglik;
  num_frames += other.num_frames;
}

namespace {

RowMatrix GatherVoicedFrames(std::span<const FeatureMatrix> features) {
  Eigen::Index total = 0, dim = -1;
  for (const auto &fm : features) {
    fm.Validate();
    if (dim < 0) dim = fm.Dim();
    if (fm.Dim() != dim)
      throw DimensionError("training features have inconsistent dimensions");
    total += fm.NumVoiced();
  }
  RowMatrix frames(total, std::max<Eigen::Index>(dim, 0));
  Eigen::Index row = 0;
  for (const auto &fm : features)
    for (Eigen::Index t = 0; t < fm.NumFrames(); ++t)
      if (fm.Voiced(t)) frames.row(row++) = fm.frames.row(t);
  return frames;
}

double SquaredDistance(const RowMatrix &a, Eigen::Index i, const RowMatrix &b,
                       Eigen::Index j) {
  return (a.row(i) - b.row(j)).squaredNorm();
}

// k-means++ seeding on (a subset of) the data.
RowMatrix SeedCenters(const RowMatrix &data, Eigen::Index num_comp,
                      Eigen::Index max_frames, std::mt19937_64 &rng) {
  const Eigen::Index N = data.rows();
  std::vector<Eigen::Index> pool(N);
  for (Eigen::Index i = 0; i < N; ++i) pool[i] = i;
  if (N > max_frames) {
    std::shuffle(pool.begin(), pool.end(), rng);
    pool.resize(max_frames);
    std::sort(pool.begin(), pool.end());
  }
  const Eigen::Index P = pool.size();
  RowMatrix centers(num_comp, data.cols());
  std::uniform_int_distribution<Eigen::Index> pick(0, P - 1);
  centers.row(0) = data.row(pool[pick(rng)]);
  std::vector<double> dist(P, std::numeric_limits<double>::infinity());
  for (Eigen::Index c = 1; c < num_comp; ++c) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < P; ++i) {
      dist[i] = std::min(dist[i],
                         (data.row(pool[i]) - centers.row(c - 1)).squaredNorm());
      total += dist[i];
    }
    Eigen::Index chosen = pick(rng);
    if (total > 0.0) {
      double r = std::uniform_real_distribution<double>(0.0, total)(rng);
      double run = 0.0;
      for (Eigen::Index i = 0; i < P; ++i) {
        run += dist[i];
        if (run >= r) {
          chosen = i;
          break;
        }
      }
    }
    centers.row(c) = data.row(pool[chosen]);
  }
  return centers;
}

GmmModel InitFromKmeans(const RowMatrix &data, const UbmTrainOptions &opts,
                        std::mt19937_64 &rng) {
  const Eigen::Index N = data.rows(), F = data.cols(),
                     C = opts.num_components;
  RowMatrix centers = SeedCenters(data, C, opts.max_seed_frames, rng);
  Eigen::RowVectorXd global_mean = data.colwise().mean();
  Eigen::RowVectorXd global_var =
      (data.rowwise() - global_mean).array().square().colwise().mean();
  global_var = global_var.array().max(opts.var_floor);

  std::vector<Eigen::Index> assign(N);
  std::uniform_int_distribution<Eigen::Index> pick(0, N - 1);
  auto assign_all = [&]() {
    for (Eigen::Index i = 0; i < N; ++i) {
      Eigen::Index best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (Eigen::Index c = 0; c < C; ++c) {
        double d = SquaredDistance(data, i, centers, c);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      assign[i] = best;
    }
  };
  for (int it = 0; it < opts.kmeans_iters; ++it) {
    assign_all();
    RowMatrix sum = RowMatrix::Zero(C, F);
    Vector count = Vector::Zero(C);
    for (Eigen::Index i = 0; i < N; ++i) {
      sum.row(assign[i]) += data.row(i);
      count(assign[i]) += 1.0;
    }
    for (Eigen::Index c = 0; c < C; ++c) {
      if (count(c) > 0.0) {
        centers.row(c) = sum.row(c) / count(c);
      } else {
        LogWarning("k-means: empty cluster " + std::to_string(c) +
                   ", reseeding from a random frame");
        centers.row(c) = data.row(pick(rng));
      }
    }
  }
  assign_all();

  GmmModel gmm;
  gmm.weights = Vector::Zero(C);
  gmm.means = centers;
  gmm.vars = RowMatrix::Zero(C, F);
  for (Eigen::Index i = 0; i < N; ++i) {
    gmm.weights(assign[i]) += 1.0;
    gmm.vars.row(assign[i]) +=
        (data.row(i) - centers.row(assign[i])).array().square().matrix();
  }
  for (Eigen::Index c = 0; c < C; ++c) {
    if (gmm.weights(c) >= 2.0) {
      gmm.vars.row(c) /= gmm.weights(c);
      gmm.vars.row(c) = gmm.vars.row(c).array().max(opts.var_floor);
    } else {
      gmm.vars.row(c) = global_var;
    }
    gmm.weights(c) = std::max(gmm.weights(c), 1.0);
  }
  gmm.weights /= gmm.weights.sum();
  return gmm;
}

// Fixed chunking keeps the accumulation order independent of worker count.
constexpr Eigen::Index kChunkFrames = 4096;

GmmAccumulator AccumulateAll(const GmmModel &gmm, const RowMatrix &data,
                             int num_workers) {
  GmmScorer scorer(gmm);
  const Eigen::Index N = data.rows();
  const std::size_t num_chunks = (N + kChunkFrames - 1) / kChunkFrames;
  std::vector<GmmAccumulator> parts(num_chunks);
  ParallelFor(num_chunks, num_workers, [&](std::size_t i) {
    GmmAccumulator acc(gmm.NumComponents(), gmm.Dim());
    Eigen::Index begin = static_cast<Eigen::Index>(i) * kChunkFrames;
    acc.AccumulateFrames(scorer, data, begin, std::min(N, begin + kChunkFrames));
    parts[i] = std::move(acc);
  });
  GmmAccumulator total(gmm.NumComponents(), gmm.Dim());
  for (const auto &p : parts) total.Merge(p);
  return total;
}

}  // namespace

UbmTrainResult TrainUbm(std::span<const FeatureMatrix> features,
                        const UbmTrainOptions &opts) {
  if (opts.num_components < 1)
    throw InvalidArgument("UBM needs at least one component");
  if (opts.num_iters < 0) throw InvalidArgument("negative iteration count");
  RowMatrix data = GatherVoicedFrames(features);
  const Eigen::Index C = opts.num_components;
  if (data.rows() < 10 * C)
    throw InsufficientDataError(
        "UBM training needs at least 10 voiced frames per component (have " +
        std::to_string(data.rows()) + " for C=" + std::to_string(C) + ")");

  std::mt19937_64 rng(opts.seed);
  std::uniform_int_distribution<Eigen::Index> pick(0, data.rows() - 1);
  UbmTrainResult result;
  result.gmm = InitFromKmeans(data, opts, rng);
  const Eigen::RowVectorXd global_var =
      ((data.rowwise() - data.colwise().mean()).array().square().colwise().mean())
          .max(opts.var_floor);

  for (int it = 0; it < opts.num_iters; ++it) {
    GmmAccumulator acc = AccumulateAll(result.gmm, data, opts.num_workers);
    result.loglik_history.push_back(acc.total_loglik / acc.num_frames);
    GmmModel &g = result.gmm;
    const double total_occ = acc.occupancy.sum();
    for (Eigen::Index c = 0; c < C; ++c) {
      const double occ = acc.occupancy(c);
      if (occ < 1e-6) {
        LogWarning("UBM iteration " + std::to_string(it) + ": component " +
                   std::to_string(c) + " is empty, reseeding");
        g.means.row(c) = data.row(pick(rng));
        g.vars.row(c) = global_var;
        g.weights(c) = 1.0 / total_occ;
        continue;
      }
      g.weights(c) = occ / total_occ;
      g.means.row(c) = acc.first.row(c) / occ;
      g.vars.row(c) = (acc.second.row(c).array() / occ -
                       g.means.row(c).array().square())
                          .max(opts.var_floor);
    }
    g.weights /= g.weights.sum();
  }
  GmmAccumulator final_acc = AccumulateAll(result.gmm, data, opts.num_workers);
  result.loglik_history.push_back(final_acc.total_loglik / final_acc.num_frames);
  return result;
}

}  // namespace ivup

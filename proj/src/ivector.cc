// ivector.cc

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
#include <charconv>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "binary-io.h"
#include "ivup/ivector.h"
#include "ivup/parallel.h"

namespace ivup {

void TvModel::Validate() const {
  const Eigen::Index C = v_diag.rows(), F = v_diag.cols(), D = t.cols();
  if (C == 0 || F == 0 || D == 0) throw InvalidArgument("empty TV model");
  if (t.rows() != C * F)
    throw DimensionError("T has " + std::to_string(t.rows()) +
                         " rows, expected C*F = " + std::to_string(C * F));
  if (D > C * F) throw InvalidArgument("i-vector dimension exceeds C*F");
  CheckFinite(t, "T matrix");
  CheckFinite(v_diag, "residual covariance");
  if ((v_diag.array() <= 0.0).any())
    throw InvalidArgument("residual covariance must be positive");
}

Vector SolveSpd(const Matrix &a, const Vector &b) {
  Eigen::LLT<Matrix> llt(a);
  if (llt.info() == Eigen::Success) return llt.solve(b);
  const Eigen::Index D = a.rows();
  double ridge = 1e-10 * std::max(a.trace() / D, 1e-300);
  for (int attempt = 0; attempt < 20; ++attempt, ridge *= 10.0) {
    llt.compute(a + ridge * Matrix::Identity(D, D));
    if (llt.info() == Eigen::Success) {
      std::ostringstream msg;
      msg << "SolveSpd: Cholesky failed, added ridge " << ridge;
      LogWarning(msg.str());
      return llt.solve(b);
    }
  }
  throw NonFiniteError("SolveSpd: matrix is not positive definite");
}

namespace {

IVector Finish(const Matrix &precision, const Vector &linear,
               const std::string &utt_id, bool with_precision) {
  IVector iv;
  iv.mean = SolveSpd(precision, linear);
  iv.utt_id = utt_id;
  if (with_precision) iv.precision = precision;
  return iv;
}

// T_c' V_c^-1 T_c for every component.
std::vector<Matrix> ComputeTVinvT(const TvModel &tv) {
  const Eigen::Index C = tv.NumComponents(), D = tv.IvectorDim();
  std::vector<Matrix> out(C);
  for (Eigen::Index c = 0; c < C; ++c) {
    Vector inv_v = tv.v_diag.row(c).transpose().cwiseInverse();
    Matrix block = tv.Block(c);
    Matrix m = Matrix::Zero(D, D);
    m.selfadjointView<Eigen::Lower>().rankUpdate(
        (inv_v.cwiseSqrt().asDiagonal() * block).transpose());
    out[c] = m.selfadjointView<Eigen::Lower>();
  }
  return out;
}

IVector ExtractNormalized(const TvModel &tv, const NormalizedStats &stats,
                          bool with_precision) {
  const Eigen::Index C = tv.NumComponents(), F = tv.FeatDim(),
                     D = tv.IvectorDim();
  if (stats.NumComponents() != C || stats.Dim() != F)
    throw DimensionError("statistics do not match the TV model");
  CheckFinite(stats.n_tilde, "normalized zeroth-order statistics");
  CheckFinite(stats.f_tilde, "normalized first-order statistics");
  if ((stats.n_tilde.array() < 0.0).any())
    throw InvalidArgument("negative normalized zeroth-order statistic");

  // I + T' N~ T as a rank update with the row-scaled T.
  Eigen::Map<const Vector> n_flat(stats.n_tilde.data(), C * F);
  Eigen::Map<const Vector> f_flat(stats.f_tilde.data(), C * F);
  Matrix scaled = n_flat.cwiseSqrt().asDiagonal() * tv.t;
  Matrix precision = Matrix::Identity(D, D);
  precision.selfadjointView<Eigen::Lower>().rankUpdate(scaled.transpose());
  precision = precision.selfadjointView<Eigen::Lower>();
  Vector linear = tv.t.transpose() * f_flat;
  return Finish(precision, linear, stats.utt_id, with_precision);
}

}  // namespace

IvectorExtractor::IvectorExtractor(TvModel tv) : tv_(std::move(tv)) {
  tv_.Validate();
  t_vinv_t_ = ComputeTVinvT(tv_);
}

IVector IvectorExtractor::Extract(const NormalizedStats &stats,
                                  bool with_precision) const {
  return ExtractNormalized(tv_, stats, with_precision);
}

IVector IvectorExtractor::ExtractFromRaw(const BwStats &stats,
                                         bool with_precision) const {
  const Eigen::Index C = tv_.NumComponents(), F = tv_.FeatDim(),
                     D = tv_.IvectorDim();
  if (stats.NumComponents() != C || stats.Dim() != F)
    throw DimensionError("statistics do not match the TV model");
  CheckFinite(stats.n, "zeroth-order statistics");
  CheckFinite(stats.f_hat, "first-order statistics");
  Matrix precision = Matrix::Identity(D, D);
  for (Eigen::Index c = 0; c < C; ++c) precision += stats.n(c) * t_vinv_t_[c];
  RowMatrix vinv_f = stats.f_hat.array() / tv_.v_diag.array();
  Eigen::Map<const Vector> f_flat(vinv_f.data(), C * F);
  Vector linear = tv_.t.transpose() * f_flat;
  return Finish(precision, linear, stats.utt_id, with_precision);
}

IVector Extract(const TvModel &tv, const NormalizedStats &stats,
                bool with_precision) {
  tv.Validate();
  return ExtractNormalized(tv, stats, with_precision);
}

IVector ExtractBaseline(const TvModel &tv, const GmmModel &gmm,
                        const FeatureMatrix &fm) {
  return Extract(tv, NormalizeStats(tv.v_diag, AccumulateStandard(gmm, fm)));
}

IVector ExtractFaUncertain(const TvModel &tv, const GmmModel &gmm,
                           const FeatureMatrix &fm,
                           const UncertaintySequence &unc) {
  return Extract(tv, AccumulateFaUncertain(gmm, tv.v_diag, fm, unc));
}

IVector ExtractUbmUncertain(const TvModel &tv, const GmmModel &gmm,
                            const FeatureMatrix &fm,
                            const UncertaintySequence &unc) {
  return Extract(tv,
                 NormalizeStats(tv.v_diag, AccumulateUbmUncertain(gmm, fm, unc)));
}

IVector ExtractProposed(const TvModel &tv, const GmmModel &gmm,
                        const FeatureMatrix &fm,
                        const UncertaintySequence &unc) {
  return Extract(tv, AccumulateProposed(gmm, tv.v_diag, fm, unc));
}

namespace {

struct UttPosterior {
  Vector mean;
  Matrix cov;
  double objective = 0.0;
};

// Posterior of w for one utterance, from raw stats and cached T_c'V^-1T_c.
UttPosterior EStep(const TvModel &tv, const std::vector<Matrix> &t_vinv_t,
                   const BwStats &stats) {
  const Eigen::Index C = tv.NumComponents(), F = tv.FeatDim(),
                     D = tv.IvectorDim();
  Matrix precision = Matrix::Identity(D, D);
  for (Eigen::Index c = 0; c < C; ++c) precision += stats.n(c) * t_vinv_t[c];
  RowMatrix vinv_f = stats.f_hat.array() / tv.v_diag.array();
  Eigen::Map<const Vector> f_flat(vinv_f.data(), C * F);
  Vector linear = tv.t.transpose() * f_flat;

  Eigen::LLT<Matrix> llt(precision);
  if (llt.info() != Eigen::Success)
    throw NonFiniteError("TV E-step: posterior precision not SPD");
  UttPosterior post;
  post.mean = llt.solve(linear);
  post.cov = llt.solve(Matrix::Identity(D, D));
  double logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  post.objective = 0.5 * linear.dot(post.mean) - 0.5 * logdet;
  return post;
}

}  // namespace

TvTrainResult TrainTv(std::span<const BwStats> stats, const GmmModel &gmm,
                      const TvTrainOptions &opts) {
  gmm.Validate();
  const Eigen::Index C = gmm.NumComponents(), F = gmm.Dim(),
                     D = opts.ivector_dim;
  if (D < 1 || D > C * F)
    throw InvalidArgument("i-vector dimension must be in [1, C*F]");
  if (static_cast<double>(stats.size()) < D / 4.0 || stats.empty())
    throw InsufficientDataError("TV training needs at least D/4 utterances");
  for (const auto &s : stats) {
    if (s.variant != StatsVariant::kStandard)
      throw InvalidArgument("TV training expects standard statistics");
    if (s.NumComponents() != C || s.Dim() != F)
      throw DimensionError("statistics do not match the GMM");
    CheckFinite(s.f_hat, "training statistics");
  }

  TvTrainResult result;
  TvModel &tv = result.tv;
  tv.v_diag = gmm.vars;
  tv.t.resize(C * F, D);
  std::mt19937_64 rng(opts.seed);
  std::normal_distribution<double> normal(0.0, opts.init_stddev);
  for (Eigen::Index i = 0; i < tv.t.rows(); ++i)
    for (Eigen::Index j = 0; j < D; ++j) tv.t(i, j) = normal(rng);

  const std::size_t U = stats.size();
  std::vector<UttPosterior> posts(U);
  auto run_estep = [&]() {
    auto cache = ComputeTVinvT(tv);
    ParallelFor(U, opts.num_workers,
                [&](std::size_t u) { posts[u] = EStep(tv, cache, stats[u]); });
    double total = 0.0;
    for (const auto &p : posts) total += p.objective;
    return total / static_cast<double>(U);
  };

  for (int it = 0; it < opts.num_iters; ++it) {
    result.objective_history.push_back(run_estep());
    // Accumulate in utterance order so the result is worker-count invariant.
    std::vector<Matrix> a(C, Matrix::Zero(D, D));
    Matrix y = Matrix::Zero(C * F, D);
    for (std::size_t u = 0; u < U; ++u) {
      Matrix second = posts[u].cov + posts[u].mean * posts[u].mean.transpose();
      for (Eigen::Index c = 0; c < C; ++c)
        if (stats[u].n(c) != 0.0) a[c] += stats[u].n(c) * second;
      Eigen::Map<const Vector> f_flat(stats[u].f_hat.data(), C * F);
      y.noalias() += f_flat * posts[u].mean.transpose();
    }
    for (Eigen::Index c = 0; c < C; ++c) {
      Eigen::LLT<Matrix> llt(a[c]);
      if (llt.info() != Eigen::Success) {
        LogWarning("TV M-step: accumulator for component " +
                   std::to_string(c) + " is rank deficient, adding ridge 1e-8");
        llt.compute(a[c] + 1e-8 * Matrix::Identity(D, D));
      }
      tv.t.middleRows(c * F, F) =
          llt.solve(y.middleRows(c * F, F).transpose()).transpose();
    }
  }
  result.objective_history.push_back(run_estep());
  return result;
}

Vector PrincipalAngles(const Matrix &a, const Matrix &b) {
  if (a.rows() != b.rows())
    throw DimensionError("principal angles need matrices of equal height");
  Matrix qa = Eigen::HouseholderQR<Matrix>(a).householderQ() *
              Matrix::Identity(a.rows(), a.cols());
  Matrix qb = Eigen::HouseholderQR<Matrix>(b).householderQ() *
              Matrix::Identity(b.rows(), b.cols());
  Eigen::JacobiSVD<Matrix> svd(qa.transpose() * qb);
  Vector sv = svd.singularValues();
  Vector angles(sv.size());
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    angles(i) = std::acos(std::clamp(sv(i), -1.0, 1.0));
  std::sort(angles.data(), angles.data() + angles.size());
  return angles;
}

namespace {
constexpr std::string_view kTvMagic = "UVTV";
}

void WriteTv(const std::filesystem::path &path, const TvModel &tv) {
  tv.Validate();
  auto os = binary::OpenOut(path);
  binary::PutMagic(os, kTvMagic);
  binary::Put<std::uint32_t>(os, kTvFormatVersion);
  binary::Put<std::uint64_t>(os, tv.NumComponents());
  binary::Put<std::uint64_t>(os, tv.FeatDim());
  binary::Put<std::uint64_t>(os, tv.IvectorDim());
  RowMatrix t_rows = tv.t;
  binary::PutDoubles(os, t_rows.data(), t_rows.size());
  binary::PutDoubles(os, tv.v_diag.data(), tv.v_diag.size());
  if (!os) throw Error("UVTV: write failed");
}

TvModel ReadTv(const std::filesystem::path &path) {
  auto is = binary::OpenIn(path);
  binary::ExpectMagic(is, kTvMagic, kTvMagic);
  auto version = binary::Get<std::uint32_t>(is, kTvMagic);
  if (version != kTvFormatVersion)
    throw FormatError("UVTV: unsupported version " + std::to_string(version));
  auto C = binary::Get<std::uint64_t>(is, kTvMagic);
  auto F = binary::Get<std::uint64_t>(is, kTvMagic);
  auto D = binary::Get<std::uint64_t>(is, kTvMagic);
  if (C == 0 || F == 0 || D == 0 || F > binary::kMaxElements / C ||
      D > binary::kMaxElements / (C * F))
    throw FormatError("UVTV: implausible dimensions");
  RowMatrix t_rows(C * F, D);
  binary::GetDoubles(is, t_rows.data(), t_rows.size(), kTvMagic);
  TvModel tv;
  tv.t = t_rows;
  tv.v_diag.resize(C, F);
  binary::GetDoubles(is, tv.v_diag.data(), tv.v_diag.size(), kTvMagic);
  tv.Validate();
  return tv;
}

void WriteIvectorsCsv(const std::filesystem::path &path,
                      std::span<const IVector> ivectors) {
  std::ofstream os(path);
  if (!os) throw Error("cannot open '" + path.string() + "' for writing");
  const Eigen::Index D = ivectors.empty() ? 0 : ivectors.front().mean.size();
  os << "utt_id";
  for (Eigen::Index d = 0; d < D; ++d) os << ",w_" << d;
  os << '\n';
  char buf[64];
  for (const auto &iv : ivectors) {
    if (iv.mean.size() != D)
      throw DimensionError("i-vectors of different dimension in one file");
    os << iv.utt_id;
    for (Eigen::Index d = 0; d < D; ++d) {
      auto res = std::to_chars(buf, buf + sizeof(buf), iv.mean(d));
      os << ',' << std::string_view(buf, res.ptr - buf);
    }
    os << '\n';
  }
  if (!os) throw Error("write failed for '" + path.string() + "'");
}

std::vector<IVector> ReadIvectorsCsv(const std::filesystem::path &path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open '" + path.string() + "' for reading");
  std::string line;
  if (!std::getline(is, line) || line.rfind("utt_id", 0) != 0)
    throw FormatError(path.string() + ": missing i-vector CSV header");
  const auto D = std::count(line.begin(), line.end(), ',');
  std::vector<IVector> out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    IVector iv;
    std::getline(ss, iv.utt_id, ',');
    iv.mean.resize(D);
    for (Eigen::Index d = 0; d < D; ++d) {
      if (!std::getline(ss, field, ','))
        throw FormatError(path.string() + ": short row for '" + iv.utt_id + "'");
      double v = 0.0;
      auto res = std::from_chars(field.data(), field.data() + field.size(), v);
      if (res.ec != std::errc() || !std::isfinite(v))
        throw FormatError(path.string() + ": bad value in row '" + iv.utt_id +
                          "'");
      iv.mean(d) = v;
    }
    out.push_back(std::move(iv));
  }
  return out;
}

}  // namespace ivup

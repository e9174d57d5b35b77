// bw-stats.cc

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

#include "binary-io.h"
#include "ivup/bw-stats.h"
#include "ivup/kernels.h"

namespace ivup {

const char *VariantName(StatsVariant v) {
  switch (v) {
    case StatsVariant::kStandard: return "standard";
    case StatsVariant::kUbmUncertain: return "ubm-uncertain";
    case StatsVariant::kNormalized: return "normalized";
    case StatsVariant::kFaUncertain: return "fa-uncertain";
    case StatsVariant::kProposed: return "proposed";
  }
  return "unknown";
}

StatsVariant VariantFromName(const std::string &name) {
  for (auto v : {StatsVariant::kStandard, StatsVariant::kUbmUncertain,
                 StatsVariant::kNormalized, StatsVariant::kFaUncertain,
                 StatsVariant::kProposed})
    if (name == VariantName(v)) return v;
  throw InvalidArgument("unknown statistics variant '" + name + "'");
}

bool IsNormalizedVariant(StatsVariant v) {
  return v == StatsVariant::kNormalized || v == StatsVariant::kFaUncertain ||
         v == StatsVariant::kProposed;
}

BwStats BwStats::Zero(Eigen::Index C, Eigen::Index F, StatsVariant v) {
  return {Vector::Zero(C), RowMatrix::Zero(C, F), {}, v};
}

NormalizedStats NormalizedStats::Zero(Eigen::Index C, Eigen::Index F,
                                      StatsVariant v) {
  return {RowMatrix::Zero(C, F), RowMatrix::Zero(C, F), {}, v};
}

Vector WienerGain(const Vector &sigma_c, const Vector &sigma_bar_t) {
  if (sigma_c.size() != sigma_bar_t.size())
    throw DimensionError("Wiener gain: dimension mismatch");
  if ((sigma_c.array() <= 0.0).any())
    throw InvalidArgument("Wiener gain: non-positive model variance");
  if ((sigma_bar_t.array() < 0.0).any())
    throw InvalidArgument("Wiener gain: negative uncertainty");
  return sigma_c.array() / (sigma_c.array() + sigma_bar_t.array());
}

namespace {

void CheckInputs(const GmmModel &gmm, const FeatureMatrix &fm,
                 const UncertaintySequence *unc) {
  if (fm.Dim() != gmm.Dim())
    throw DimensionError("features and GMM have different dimensions");
  fm.Validate();
  if (unc != nullptr) unc->ValidateAgainst(fm);
  if (fm.NumVoiced() == 0)
    throw InsufficientDataError("utterance '" + fm.utt_id +
                                "' has no voiced frames");
}

void CheckPosteriors(const GmmModel &gmm, const FeatureMatrix &fm,
                     const RowMatrix &gammas, Eigen::Index begin,
                     Eigen::Index end) {
  if (gammas.rows() != fm.NumFrames() || gammas.cols() != gmm.NumComponents())
    throw DimensionError("posterior matrix shape mismatch");
  if (begin < 0 || end > fm.NumFrames() || begin > end)
    throw InvalidArgument("frame range out of bounds");
}

}  // namespace

BwStats AccumulateFromPosteriors(const GmmModel &gmm, const FeatureMatrix &fm,
                                 const RowMatrix &gammas,
                                 const UncertaintySequence *unc,
                                 StatsVariant variant, Eigen::Index begin,
                                 Eigen::Index end) {
  if (variant != StatsVariant::kStandard &&
      variant != StatsVariant::kUbmUncertain)
    throw InvalidArgument("AccumulateFromPosteriors: not a raw variant");
  const bool wiener = variant == StatsVariant::kUbmUncertain;
  if (wiener && unc == nullptr)
    throw InvalidArgument("UBM-side propagation needs an uncertainty");
  CheckPosteriors(gmm, fm, gammas, begin, end);
  const Eigen::Index C = gmm.NumComponents(), F = gmm.Dim();
  const auto &k = kernels::Active();
  BwStats stats = BwStats::Zero(C, F, variant);
  stats.utt_id = fm.utt_id;
  std::vector<double> resid(F), gain(F);
  for (Eigen::Index t = begin; t < end; ++t) {
    if (!fm.Voiced(t)) continue;
    const double *y = fm.frames.row(t).data();
    for (Eigen::Index c = 0; c < C; ++c) {
      const double g = gammas(t, c);
      if (g == 0.0) continue;
      const double *m = gmm.means.row(c).data();
      for (Eigen::Index f = 0; f < F; ++f) resid[f] = y[f] - m[f];
      stats.n(c) += g;
      if (wiener) {
        const double *s = gmm.vars.row(c).data();
        const double *u = unc->diag_vars.row(t).data();
        for (Eigen::Index f = 0; f < F; ++f) gain[f] = s[f] / (s[f] + u[f]);
        k.axpy_mul(g, gain.data(), resid.data(), stats.f_hat.row(c).data(), F);
      } else {
        k.axpy(g, resid.data(), stats.f_hat.row(c).data(), F);
      }
    }
  }
  return stats;
}

NormalizedStats AccumulateNormalizedFromPosteriors(
    const GmmModel &gmm, const RowMatrix &residual_vars,
    const FeatureMatrix &fm, const RowMatrix &gammas,
    const UncertaintySequence &unc, bool wiener, Eigen::Index begin,
    Eigen::Index end) {
  CheckPosteriors(gmm, fm, gammas, begin, end);
  const Eigen::Index C = gmm.NumComponents(), F = gmm.Dim();
  if (residual_vars.rows() != C || residual_vars.cols() != F)
    throw DimensionError("residual covariance shape mismatch");
  const auto &k = kernels::Active();
  NormalizedStats stats = NormalizedStats::Zero(
      C, F, wiener ? StatsVariant::kProposed : StatsVariant::kFaUncertain);
  stats.utt_id = fm.utt_id;
  std::vector<double> resid(F), inv_total(F), weight(F);
  for (Eigen::Index t = begin; t < end; ++t) {
    if (!fm.Voiced(t)) continue;
    const double *y = fm.frames.row(t).data();
    const double *u = unc.diag_vars.row(t).data();
    for (Eigen::Index c = 0; c < C; ++c) {
      const double g = gammas(t, c);
      if (g == 0.0) continue;
      const double *m = gmm.means.row(c).data();
      const double *v = residual_vars.row(c).data();
      for (Eigen::Index f = 0; f < F; ++f) {
        resid[f] = y[f] - m[f];
        inv_total[f] = 1.0 / (v[f] + u[f]);
      }
      if (wiener) {
        const double *s = gmm.vars.row(c).data();
        for (Eigen::Index f = 0; f < F; ++f)
          weight[f] = inv_total[f] * (s[f] / (s[f] + u[f]));
      }
      k.axpy(g, inv_total.data(), stats.n_tilde.row(c).data(), F);
      k.axpy_mul(g, wiener ? weight.data() : inv_total.data(), resid.data(),
                 stats.f_tilde.row(c).data(), F);
    }
  }
  return stats;
}

BwStats AccumulateStandard(const GmmModel &gmm, const FeatureMatrix &fm) {
  CheckInputs(gmm, fm, nullptr);
  FramePosteriors post = ComputePosteriors(gmm, fm);
  return AccumulateFromPosteriors(gmm, fm, post.gammas, nullptr,
                                  StatsVariant::kStandard, 0, fm.NumFrames());
}

BwStats AccumulateUbmUncertain(const GmmModel &gmm, const FeatureMatrix &fm,
                               const UncertaintySequence &unc) {
  CheckInputs(gmm, fm, &unc);
  FramePosteriors post = ComputePosteriorsUncertain(gmm, fm, unc);
  return AccumulateFromPosteriors(gmm, fm, post.gammas, &unc,
                                  StatsVariant::kUbmUncertain, 0,
                                  fm.NumFrames());
}

NormalizedStats NormalizeStats(const RowMatrix &residual_vars,
                               const BwStats &stats) {
  const Eigen::Index C = stats.NumComponents(), F = stats.Dim();
  if (residual_vars.rows() != C || residual_vars.cols() != F)
    throw DimensionError("residual covariance shape mismatch");
  if ((residual_vars.array() <= 0.0).any())
    throw InvalidArgument("residual covariance must be positive");
  NormalizedStats out = NormalizedStats::Zero(C, F, StatsVariant::kNormalized);
  out.utt_id = stats.utt_id;
  for (Eigen::Index c = 0; c < C; ++c) {
    out.n_tilde.row(c) = stats.n(c) / residual_vars.row(c).array();
    out.f_tilde.row(c) =
        stats.f_hat.row(c).array() / residual_vars.row(c).array();
  }
  return out;
}

NormalizedStats NormalizeStats(const GmmModel &gmm, const BwStats &stats) {
  return NormalizeStats(gmm.vars, stats);
}

NormalizedStats AccumulateFaUncertain(const GmmModel &gmm,
                                      const RowMatrix &residual_vars,
                                      const FeatureMatrix &fm,
                                      const UncertaintySequence &unc) {
  CheckInputs(gmm, fm, &unc);
  // Posteriors deliberately ignore the uncertainty in this variant.
  FramePosteriors post = ComputePosteriors(gmm, fm);
  return AccumulateNormalizedFromPosteriors(gmm, residual_vars, fm,
                                            post.gammas, unc, false, 0,
                                            fm.NumFrames());
}

NormalizedStats AccumulateFaUncertain(const GmmModel &gmm,
                                      const FeatureMatrix &fm,
                                      const UncertaintySequence &unc) {
  return AccumulateFaUncertain(gmm, gmm.vars, fm, unc);
}

NormalizedStats AccumulateProposed(const GmmModel &gmm,
                                   const RowMatrix &residual_vars,
                                   const FeatureMatrix &fm,
                                   const UncertaintySequence &unc) {
  CheckInputs(gmm, fm, &unc);
  FramePosteriors post = ComputePosteriorsUncertain(gmm, fm, unc);
  return AccumulateNormalizedFromPosteriors(gmm, residual_vars, fm,
                                            post.gammas, unc, true, 0,
                                            fm.NumFrames());
}

NormalizedStats AccumulateProposed(const GmmModel &gmm,
                                   const FeatureMatrix &fm,
                                   const UncertaintySequence &unc) {
  return AccumulateProposed(gmm, gmm.vars, fm, unc);
}

BwStats MergeStats(const BwStats &a, const BwStats &b) {
  if (a.variant != b.variant)
    throw InvalidArgument("cannot merge statistics of different variants");
  if (a.n.size() != b.n.size() || a.f_hat.cols() != b.f_hat.cols())
    throw DimensionError("cannot merge statistics of different shape");
  BwStats out = a;
  out.n += b.n;
  out.f_hat += b.f_hat;
  return out;
}

NormalizedStats MergeStats(const NormalizedStats &a, const NormalizedStats &b) {
  if (a.variant != b.variant)
    throw InvalidArgument("cannot merge statistics of different variants");
  if (a.n_tilde.rows() != b.n_tilde.rows() ||
      a.n_tilde.cols() != b.n_tilde.cols())
    throw DimensionError("cannot merge statistics of different shape");
  NormalizedStats out = a;
  out.n_tilde += b.n_tilde;
  out.f_tilde += b.f_tilde;
  return out;
}

double FstatCosine(const BwStats &a, const BwStats &b) {
  if (a.f_hat.rows() != b.f_hat.rows() || a.f_hat.cols() != b.f_hat.cols())
    throw DimensionError("F-statistic cosine: shape mismatch");
  const std::size_t n = a.f_hat.size();
  const auto &k = kernels::Active();
  const double ab = k.dot(a.f_hat.data(), b.f_hat.data(), n);
  const double aa = k.dot(a.f_hat.data(), a.f_hat.data(), n);
  const double bb = k.dot(b.f_hat.data(), b.f_hat.data(), n);
  if (aa <= 0.0 || bb <= 0.0)
    throw InvalidArgument("F-statistic cosine of a zero vector");
  const double cosine = std::clamp(ab / std::sqrt(aa * bb), -1.0, 1.0);
  return 1.0 - cosine;
}

namespace {

constexpr std::string_view kStatsMagic = "UVST";

void WriteStatsImpl(std::ostream &os, StatsVariant variant, Eigen::Index C,
                    Eigen::Index F, const double *zeroth, std::size_t nzeroth,
                    const double *first) {
  binary::PutMagic(os, kStatsMagic);
  binary::Put<std::uint32_t>(os, kStatsFormatVersion);
  binary::Put<std::uint8_t>(os, static_cast<std::uint8_t>(variant));
  binary::Put<std::uint64_t>(os, C);
  binary::Put<std::uint64_t>(os, F);
  binary::PutDoubles(os, zeroth, nzeroth);
  binary::PutDoubles(os, first, C * F);
  if (!os) throw Error("UVST: write failed");
}

}  // namespace

void WriteStats(std::ostream &os, const BwStats &stats) {
  WriteStatsImpl(os, stats.variant, stats.NumComponents(), stats.Dim(),
                 stats.n.data(), stats.n.size(), stats.f_hat.data());
}

void WriteStats(std::ostream &os, const NormalizedStats &stats) {
  WriteStatsImpl(os, stats.variant, stats.NumComponents(), stats.Dim(),
                 stats.n_tilde.data(), stats.n_tilde.size(),
                 stats.f_tilde.data());
}

void WriteStats(const std::filesystem::path &path, const BwStats &stats) {
  auto os = binary::OpenOut(path);
  WriteStats(os, stats);
}

void WriteStats(const std::filesystem::path &path,
                const NormalizedStats &stats) {
  auto os = binary::OpenOut(path);
  WriteStats(os, stats);
}

AnyStats ReadStats(std::istream &is, std::string utt_id) {
  binary::ExpectMagic(is, kStatsMagic, kStatsMagic);
  auto version = binary::Get<std::uint32_t>(is, kStatsMagic);
  if (version != kStatsFormatVersion)
    throw FormatError("UVST: unsupported version " + std::to_string(version));
  auto tag = binary::Get<std::uint8_t>(is, kStatsMagic);
  if (tag > static_cast<std::uint8_t>(StatsVariant::kProposed))
    throw FormatError("UVST: unknown variant tag");
  auto C = binary::Get<std::uint64_t>(is, kStatsMagic);
  auto F = binary::Get<std::uint64_t>(is, kStatsMagic);
  if (C == 0 || F == 0 || F > binary::kMaxElements / C)
    throw FormatError("UVST: implausible dimensions");
  AnyStats out;
  out.variant = static_cast<StatsVariant>(tag);
  if (IsNormalizedVariant(out.variant)) {
    out.normed = NormalizedStats::Zero(C, F, out.variant);
    binary::GetDoubles(is, out.normed.n_tilde.data(), C * F, kStatsMagic);
    binary::GetDoubles(is, out.normed.f_tilde.data(), C * F, kStatsMagic);
    CheckFinite(out.normed.n_tilde, "UVST");
    CheckFinite(out.normed.f_tilde, "UVST");
    out.normed.utt_id = std::move(utt_id);
  } else {
    out.raw = BwStats::Zero(C, F, out.variant);
    binary::GetDoubles(is, out.raw.n.data(), C, kStatsMagic);
    binary::GetDoubles(is, out.raw.f_hat.data(), C * F, kStatsMagic);
    CheckFinite(out.raw.n, "UVST");
    CheckFinite(out.raw.f_hat, "UVST");
    out.raw.utt_id = std::move(utt_id);
  }
  return out;
}

AnyStats ReadStats(const std::filesystem::path &path) {
  auto is = binary::OpenIn(path);
  return ReadStats(is, path.stem().string());
}

}  // namespace ivup

// tests/bw-stats-test.cc


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


#include <cmath>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "ivup/bw-stats.h"
#include "test-util.h"

namespace ivup {
namespace {

using testing::ConstantUncertainty;
using testing::SingleFrame;
using testing::UnitGmm;

// Plain-loop reference accumulation over voiced frames from given
// posteriors. mode 0: standard, 1: UBM-side Wiener, 2: FA, 3: proposed.
struct RefStats {
  RowMatrix n, f;
};

RefStats Reference(const GmmModel &gmm, const FeatureMatrix &fm,
                   const RowMatrix &gammas, const RowMatrix &unc, int mode) {
  const Eigen::Index C = gmm.NumComponents(), F = gmm.Dim();
  RefStats r{RowMatrix::Zero(C, F), RowMatrix::Zero(C, F)};
  for (Eigen::Index t = 0; t < fm.NumFrames(); ++t) {
    if (!fm.Voiced(t)) continue;
    for (Eigen::Index c = 0; c < C; ++c) {
      for (Eigen::Index f = 0; f < F; ++f) {
        double g = gammas(t, c), s = gmm.vars(c, f), u = unc(t, f);
        double d = fm.frames(t, f) - gmm.means(c, f);
        double w = s / (s + u);
        switch (mode) {
          case 0: r.n(c, f) += g; r.f(c, f) += g * d; break;
          case 1: r.n(c, f) += g; r.f(c, f) += g * w * d; break;
          case 2: r.n(c, f) += g / (s + u); r.f(c, f) += g * d / (s + u); break;
          case 3: r.n(c, f) += g / (s + u); r.f(c, f) += g * w * d / (s + u); break;
        }
      }
    }
  }
  return r;
}

struct Fixture {
  GmmModel gmm;
  FeatureMatrix fm;
  UncertaintySequence unc;
};

Fixture MakeFixture(std::uint64_t seed, Eigen::Index C = 6, Eigen::Index F = 4,
                    Eigen::Index L = 40) {
  std::mt19937_64 rng(seed);
  Fixture x;
  x.gmm = testing::RandomGmm(C, F, rng);
  x.fm = testing::RandomFeatures(x.gmm, L, rng, 0.7);
  x.unc = testing::RandomUncertainty(x.fm, rng, 0.8);
  return x;
}

TEST(WienerGainTest, HandCases) {
  Vector s = Vector::Ones(3), u(3);
  u << 0.0, 1.0, 1e12;
  Vector w = WienerGain(s, u);
  EXPECT_EQ(w(0), 1.0);
  EXPECT_EQ(w(1), 0.5);
  EXPECT_LT(w(2), 1e-11);
  EXPECT_GT(w(2), 0.0);
  EXPECT_THROW(WienerGain(Vector::Zero(3), u), InvalidArgument);
  EXPECT_THROW(WienerGain(s, -u), InvalidArgument);
  EXPECT_THROW(WienerGain(s, Vector::Ones(2)), DimensionError);
}

TEST(Standard, SingleFrameSingleComponent) {
  GmmModel gmm = UnitGmm();
  gmm.means(0, 0) = 0.5;
  BwStats s = AccumulateStandard(gmm, SingleFrame(3.0));
  EXPECT_EQ(s.n(0), 1.0);
  EXPECT_EQ(s.f_hat(0, 0), 2.5);
}

TEST(Standard, SymmetricFramesCancel) {
  GmmModel gmm = UnitGmm();
  gmm.means(0, 0) = 1.0;
  RowMatrix x(2, 1);
  x << -1.0, 3.0;
  BwStats s = AccumulateStandard(gmm, MakeFeatures(x));
  EXPECT_EQ(s.n(0), 2.0);
  EXPECT_EQ(s.f_hat(0, 0), 0.0);
}

TEST(Standard, MatchesReferenceAndConserves) {
  Fixture x = MakeFixture(41);
  FramePosteriors p = ComputePosteriors(x.gmm, x.fm);
  RefStats r = Reference(x.gmm, x.fm, p.gammas, x.unc.diag_vars, 0);
  BwStats s = AccumulateStandard(x.gmm, x.fm);
  EXPECT_LT((s.n - r.n.col(0)).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((s.f_hat - r.f).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_NEAR(s.n.sum(), static_cast<double>(x.fm.NumVoiced()), 1e-8);
}

TEST(Standard, NoVoicedFramesIsError) {
  FeatureMatrix fm = SingleFrame(0.0);
  fm.vad_mask[0] = 0;
  EXPECT_THROW(AccumulateStandard(UnitGmm(), fm), InsufficientDataError);
}

TEST(Normalize, HandCases) {
  BwStats s = BwStats::Zero(1, 1, StatsVariant::kStandard);
  s.n(0) = 2.0;
  s.f_hat(0, 0) = 1.0;
  NormalizedStats ns = NormalizeStats(RowMatrix::Constant(1, 1, 4.0), s);
  EXPECT_EQ(ns.n_tilde(0, 0), 0.5);
  EXPECT_EQ(ns.f_tilde(0, 0), 0.25);
  EXPECT_EQ(ns.variant, StatsVariant::kNormalized);

  Fixture x = MakeFixture(42);
  BwStats raw = AccumulateStandard(x.gmm, x.fm);
  NormalizedStats id = NormalizeStats(RowMatrix::Ones(6, 4), raw);
  for (Eigen::Index f = 0; f < 4; ++f) EXPECT_EQ(id.n_tilde.col(f), raw.n);
  EXPECT_EQ(id.f_tilde, raw.f_hat);
  EXPECT_THROW(NormalizeStats(RowMatrix::Ones(5, 4), raw), DimensionError);
}

TEST(FaUncertain, HandCase) {
  FeatureMatrix fm = SingleFrame(2.0);
  NormalizedStats ns =
      AccumulateFaUncertain(UnitGmm(), fm, ConstantUncertainty(fm, 1.0));
  EXPECT_DOUBLE_EQ(ns.n_tilde(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(ns.f_tilde(0, 0), 1.0);
}

TEST(UbmUncertain, HandCase) {
  FeatureMatrix fm = SingleFrame(2.0);
  BwStats s = AccumulateUbmUncertain(UnitGmm(), fm, ConstantUncertainty(fm, 1.0));
  EXPECT_DOUBLE_EQ(s.n(0), 1.0);
  EXPECT_DOUBLE_EQ(s.f_hat(0, 0), 1.0);
}

TEST(Proposed, HandCase) {
  FeatureMatrix fm = SingleFrame(2.0);
  NormalizedStats ns =
      AccumulateProposed(UnitGmm(), fm, ConstantUncertainty(fm, 1.0));
  EXPECT_DOUBLE_EQ(ns.n_tilde(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(ns.f_tilde(0, 0), 0.5);
}

TEST(Variants, MatchReferenceWithRandomInputs) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Fixture x = MakeFixture(100 + seed);
    const RowMatrix &u = x.unc.diag_vars;
    RowMatrix biased = ComputePosteriors(x.gmm, x.fm).gammas;
    RowMatrix unbiased = ComputePosteriorsUncertain(x.gmm, x.fm, x.unc).gammas;

    BwStats ubm = AccumulateUbmUncertain(x.gmm, x.fm, x.unc);
    RefStats r1 = Reference(x.gmm, x.fm, unbiased, u, 1);
    EXPECT_LT((ubm.n - r1.n.col(0)).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((ubm.f_hat - r1.f).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_NEAR(ubm.n.sum(), static_cast<double>(x.fm.NumVoiced()), 1e-8);

    NormalizedStats fa = AccumulateFaUncertain(x.gmm, x.fm, x.unc);
    RefStats r2 = Reference(x.gmm, x.fm, biased, u, 2);
    EXPECT_LT((fa.n_tilde - r2.n).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((fa.f_tilde - r2.f).cwiseAbs().maxCoeff(), 1e-12);

    NormalizedStats prop = AccumulateProposed(x.gmm, x.fm, x.unc);
    RefStats r3 = Reference(x.gmm, x.fm, unbiased, u, 3);
    EXPECT_LT((prop.n_tilde - r3.n).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((prop.f_tilde - r3.f).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Variants, ZeroUncertaintyCollapse) {
  Fixture x = MakeFixture(43, 16, 13, 80);
  UncertaintySequence zero = ZeroUncertainty(x.fm);
  BwStats std_stats = AccumulateStandard(x.gmm, x.fm);
  NormalizedStats base = NormalizeStats(x.gmm, std_stats);

  BwStats ubm = AccumulateUbmUncertain(x.gmm, x.fm, zero);
  EXPECT_EQ(ubm.n, std_stats.n);
  EXPECT_EQ(ubm.f_hat, std_stats.f_hat);

  for (const NormalizedStats &ns : {AccumulateFaUncertain(x.gmm, x.fm, zero),
                                    AccumulateProposed(x.gmm, x.fm, zero)}) {
    EXPECT_LT((ns.n_tilde - base.n_tilde).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((ns.f_tilde - base.f_tilde).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Variants, InfiniteUncertaintyLimit) {
  Fixture x = MakeFixture(44);
  UncertaintySequence huge = ConstantUncertainty(x.fm, 1e12);
  NormalizedStats fa = AccumulateFaUncertain(x.gmm, x.fm, huge);
  EXPECT_LT(fa.n_tilde.maxCoeff(), 1e-9);
  EXPECT_LT(fa.f_tilde.cwiseAbs().maxCoeff(), 1e-9);
  BwStats ubm = AccumulateUbmUncertain(x.gmm, x.fm, huge);
  EXPECT_NEAR(ubm.n.sum(), static_cast<double>(x.fm.NumVoiced()), 1e-8);
  EXPECT_LT(ubm.f_hat.cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Variants, ProposedIsWienerShrunkFaForOneComponent) {
  std::mt19937_64 rng(45);
  GmmModel gmm = UnitGmm();
  gmm.vars(0, 0) = 1.7;
  for (int rep = 0; rep < 20; ++rep) {
    FeatureMatrix fm = SingleFrame(3.0 * testing::RandomVector(1, rng)(0));
    UncertaintySequence unc = testing::RandomUncertainty(fm, rng, 2.0);
    NormalizedStats fa = AccumulateFaUncertain(gmm, fm, unc);
    NormalizedStats prop = AccumulateProposed(gmm, fm, unc);
    double w = 1.7 / (1.7 + unc.diag_vars(0, 0));
    EXPECT_NEAR(prop.f_tilde(0, 0), w * fa.f_tilde(0, 0), 1e-14);
    EXPECT_LE(std::abs(prop.f_tilde(0, 0)), std::abs(fa.f_tilde(0, 0)));
  }
}

TEST(Variants, NegativeUncertaintyRejected) {
  FeatureMatrix fm = SingleFrame(1.0);
  UncertaintySequence neg = ConstantUncertainty(fm, -0.1);
  EXPECT_THROW(AccumulateFaUncertain(UnitGmm(), fm, neg), InvalidArgument);
  EXPECT_THROW(AccumulateUbmUncertain(UnitGmm(), fm, neg), InvalidArgument);
  EXPECT_THROW(AccumulateProposed(UnitGmm(), fm, neg), InvalidArgument);
}

TEST(Merge, SplitMergeEqualsWhole) {
  Fixture x = MakeFixture(46);
  RowMatrix g = ComputePosteriors(x.gmm, x.fm).gammas;
  RowMatrix gu = ComputePosteriorsUncertain(x.gmm, x.fm, x.unc).gammas;
  const Eigen::Index L = x.fm.NumFrames(), cut = 17;

  for (StatsVariant v : {StatsVariant::kStandard, StatsVariant::kUbmUncertain}) {
    const RowMatrix &gam = v == StatsVariant::kStandard ? g : gu;
    BwStats whole = AccumulateFromPosteriors(x.gmm, x.fm, gam, &x.unc, v, 0, L);
    BwStats a = AccumulateFromPosteriors(x.gmm, x.fm, gam, &x.unc, v, 0, cut);
    BwStats b = AccumulateFromPosteriors(x.gmm, x.fm, gam, &x.unc, v, cut, L);
    BwStats ab = MergeStats(a, b), ba = MergeStats(b, a);
    EXPECT_LT((ab.n - whole.n).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LT((ab.f_hat - whole.f_hat).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LT((ab.f_hat - ba.f_hat).cwiseAbs().maxCoeff(), 1e-12);
    BwStats z = MergeStats(whole, BwStats::Zero(6, 4, v));
    EXPECT_EQ(z.f_hat, whole.f_hat);
  }
  for (bool wiener : {false, true}) {
    const RowMatrix &gam = wiener ? gu : g;
    auto acc = [&](Eigen::Index b, Eigen::Index e) {
      return AccumulateNormalizedFromPosteriors(x.gmm, x.gmm.vars, x.fm, gam,
                                                x.unc, wiener, b, e);
    };
    NormalizedStats whole = acc(0, L), ab = MergeStats(acc(0, cut), acc(cut, L));
    EXPECT_LT((ab.n_tilde - whole.n_tilde).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LT((ab.f_tilde - whole.f_tilde).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(Merge, VariantMismatchRejected) {
  EXPECT_THROW(MergeStats(BwStats::Zero(2, 2, StatsVariant::kStandard),
                          BwStats::Zero(2, 2, StatsVariant::kUbmUncertain)),
               InvalidArgument);
  EXPECT_THROW(MergeStats(BwStats::Zero(2, 2, StatsVariant::kStandard),
                          BwStats::Zero(3, 2, StatsVariant::kStandard)),
               DimensionError);
}

TEST(FstatCosineTest, Cases) {
  BwStats a = BwStats::Zero(2, 2, StatsVariant::kStandard);
  a.f_hat << 1, 2, 0, 0;
  BwStats b = a;
  EXPECT_NEAR(FstatCosine(a, b), 0.0, 1e-15);
  b.f_hat << 0, 0, 3, -1;
  EXPECT_NEAR(FstatCosine(a, b), 1.0, 1e-15);
  b.f_hat = -2.0 * a.f_hat;
  EXPECT_NEAR(FstatCosine(a, b), 2.0, 1e-15);
  b.f_hat.setZero();
  EXPECT_THROW(FstatCosine(a, b), InvalidArgument);
}

TEST(VariantNames, RoundTrip) {
  for (StatsVariant v :
       {StatsVariant::kStandard, StatsVariant::kUbmUncertain,
        StatsVariant::kNormalized, StatsVariant::kFaUncertain,
        StatsVariant::kProposed})
    EXPECT_EQ(VariantFromName(VariantName(v)), v);
  EXPECT_THROW(VariantFromName("bogus"), InvalidArgument);
}

TEST(StatsIo, RoundTrip) {
  Fixture x = MakeFixture(47);
  BwStats raw = AccumulateUbmUncertain(x.gmm, x.fm, x.unc);
  std::stringstream ss;
  WriteStats(ss, raw);
  AnyStats back = ReadStats(ss, "u");
  ASSERT_EQ(back.variant, StatsVariant::kUbmUncertain);
  EXPECT_EQ(back.raw.n, raw.n);
  EXPECT_EQ(back.raw.f_hat, raw.f_hat);

  NormalizedStats ns = AccumulateProposed(x.gmm, x.fm, x.unc);
  std::stringstream sn;
  WriteStats(sn, ns);
  AnyStats nback = ReadStats(sn);
  ASSERT_EQ(nback.variant, StatsVariant::kProposed);
  EXPECT_EQ(nback.normed.n_tilde, ns.n_tilde);
  EXPECT_EQ(nback.normed.f_tilde, ns.f_tilde);
}

TEST(StatsIo, Errors) {
  BwStats s = BwStats::Zero(2, 3, StatsVariant::kStandard);
  std::stringstream ss;
  WriteStats(ss, s);
  std::string bytes = ss.str();
  std::string bad = bytes;
  bad[1] = '?';
  std::stringstream s1(bad);
  EXPECT_THROW(ReadStats(s1), FormatError);
  bad = bytes;
  bad[8] = 42;
  std::stringstream s2(bad);
  EXPECT_THROW(ReadStats(s2), FormatError);
  std::stringstream s3(bytes.substr(0, bytes.size() - 5));
  EXPECT_THROW(ReadStats(s3), TruncatedError);
}

}  // namespace
}  // namespace ivup

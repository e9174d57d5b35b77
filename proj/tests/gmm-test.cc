// tests/gmm-test.cc


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
#include <numbers>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "ivup/corpus-synth.h"
#include "ivup/gmm.h"
#include "test-util.h"

namespace ivup {
namespace {

GmmModel TwoComponents(double m0, double m1, double var = 1.0) {
  GmmModel gmm;
  gmm.weights = Vector::Constant(2, 0.5);
  gmm.means.resize(2, 1);
  gmm.means << m0, m1;
  gmm.vars = RowMatrix::Constant(2, 1, var);
  return gmm;
}

// log pi_c + log N(y | m_c, var_c), written out directly.
double LogComponent(const GmmModel &gmm, Eigen::Index c, const RowMatrix &y,
                    Eigen::Index t, const RowMatrix *extra = nullptr) {
  double s = std::log(gmm.weights(c));
  for (Eigen::Index f = 0; f < gmm.Dim(); ++f) {
    double v = gmm.vars(c, f) + (extra ? (*extra)(t, f) : 0.0);
    double d = y(t, f) - gmm.means(c, f);
    s += -0.5 * std::log(2.0 * std::numbers::pi * v) - 0.5 * d * d / v;
  }
  return s;
}

TEST(GmmModelTest, ValidateRejectsBadModels) {
  GmmModel gmm = TwoComponents(0.0, 1.0);
  EXPECT_NO_THROW(gmm.Validate());
  GmmModel bad = gmm;
  bad.weights(0) = 0.6;
  EXPECT_THROW(bad.Validate(), InvalidArgument);
  bad = gmm;
  bad.vars(1, 0) = 0.0;
  EXPECT_THROW(bad.Validate(), InvalidArgument);
  bad = gmm;
  bad.vars.resize(3, 1);
  bad.vars.setOnes();
  EXPECT_THROW(bad.Validate(), DimensionError);
}

TEST(Posteriors, SingleComponentIsOne) {
  GmmModel gmm = testing::UnitGmm();
  FramePosteriors p =
      ComputePosteriors(gmm, MakeFeatures(RowMatrix::Random(5, 1) * 10.0));
  EXPECT_EQ(p.gammas, RowMatrix::Ones(5, 1));
}

TEST(Posteriors, FarComponentHandComputed) {
  FramePosteriors p =
      ComputePosteriors(TwoComponents(0.0, 10.0), testing::SingleFrame(0.0));
  // Ratio exp(-100 / 2) / (1 + exp(-50)).
  EXPECT_NEAR(p.gammas(0, 0), 1.0, 1e-15);
  EXPECT_NEAR(p.gammas(0, 1) / std::exp(-50.0), 1.0, 1e-12);
  EXPECT_NEAR(p.gammas(0, 1), 1.9287e-22, 1e-26);
}

TEST(Posteriors, EquidistantIsHalf) {
  FramePosteriors p =
      ComputePosteriors(TwoComponents(-1.5, 2.5), testing::SingleFrame(0.5));
  EXPECT_DOUBLE_EQ(p.gammas(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(p.gammas(0, 1), 0.5);
}

TEST(Posteriors, NoUnderflowFarFromEveryComponent) {
  FramePosteriors p =
      ComputePosteriors(TwoComponents(0.0, 1.0), testing::SingleFrame(1e4));
  EXPECT_NEAR(p.gammas.row(0).sum(), 1.0, 1e-12);
  EXPECT_NEAR(p.gammas(0, 1), 1.0, 1e-12);
  EXPECT_TRUE(std::isfinite(p.loglik(0)));
}

TEST(Posteriors, MatchDirectEvaluation) {
  std::mt19937_64 rng(21);
  GmmModel gmm = testing::RandomGmm(5, 3, rng);
  FeatureMatrix fm = testing::RandomFeatures(gmm, 20, rng);
  UncertaintySequence unc = testing::RandomUncertainty(fm, rng);
  FramePosteriors p = ComputePosteriors(gmm, fm);
  FramePosteriors pu = ComputePosteriorsUncertain(gmm, fm, unc);
  for (Eigen::Index t = 0; t < 20; ++t) {
    std::vector<double> a(5), b(5);
    double za = 0.0, zb = 0.0;
    for (Eigen::Index c = 0; c < 5; ++c) {
      a[c] = std::exp(LogComponent(gmm, c, fm.frames, t));
      b[c] = std::exp(LogComponent(gmm, c, fm.frames, t, &unc.diag_vars));
      za += a[c];
      zb += b[c];
    }
    EXPECT_NEAR(p.loglik(t), std::log(za), 1e-10);
    EXPECT_NEAR(pu.loglik(t), std::log(zb), 1e-10);
    for (Eigen::Index c = 0; c < 5; ++c) {
      EXPECT_NEAR(p.gammas(t, c), a[c] / za, 1e-12);
      EXPECT_NEAR(pu.gammas(t, c), b[c] / zb, 1e-12);
    }
  }
}

TEST(Posteriors, RowsAreStochastic) {
  std::mt19937_64 rng(22);
  for (int rep = 0; rep < 20; ++rep) {
    GmmModel gmm = testing::RandomGmm(16, 4, rng);
    FeatureMatrix fm = testing::RandomFeatures(gmm, 50, rng);
    UncertaintySequence unc = testing::RandomUncertainty(fm, rng, 5.0);
    for (const auto &p :
         {ComputePosteriors(gmm, fm), ComputePosteriorsUncertain(gmm, fm, unc)}) {
      EXPECT_GE(p.gammas.minCoeff(), 0.0);
      EXPECT_LT((p.gammas.rowwise().sum().array() - 1.0).abs().maxCoeff(),
                1e-10);
    }
  }
}

TEST(Posteriors, PermutingComponentsPermutesColumns) {
  std::mt19937_64 rng(23);
  GmmModel gmm = testing::RandomGmm(6, 3, rng);
  std::vector<int> perm = {3, 0, 5, 1, 4, 2};
  GmmModel pg = gmm;
  for (int c = 0; c < 6; ++c) {
    pg.weights(c) = gmm.weights(perm[c]);
    pg.means.row(c) = gmm.means.row(perm[c]);
    pg.vars.row(c) = gmm.vars.row(perm[c]);
  }
  FeatureMatrix fm = testing::RandomFeatures(gmm, 30, rng);
  FramePosteriors a = ComputePosteriors(gmm, fm), b = ComputePosteriors(pg, fm);
  for (int c = 0; c < 6; ++c)
    EXPECT_LT((b.gammas.col(c) - a.gammas.col(perm[c])).cwiseAbs().maxCoeff(),
              1e-14);
}

TEST(Posteriors, DimensionMismatch) {
  EXPECT_THROW(ComputePosteriors(TwoComponents(0, 1),
                                 MakeFeatures(RowMatrix::Zero(2, 2))),
               DimensionError);
}

TEST(UncertainPosteriors, ZeroUncertaintyIsBitIdentical) {
  std::mt19937_64 rng(24);
  GmmModel gmm = testing::RandomGmm(32, 13, rng);
  FeatureMatrix fm = testing::RandomFeatures(gmm, 100, rng);
  FramePosteriors a = ComputePosteriors(gmm, fm);
  FramePosteriors b = ComputePosteriorsUncertain(gmm, fm, ZeroUncertainty(fm));
  EXPECT_EQ(a.gammas, b.gammas);
  EXPECT_EQ(a.loglik, b.loglik);
}

TEST(UncertainPosteriors, HugeUncertaintyFlattensToPriors) {
  GmmModel gmm;
  gmm.weights.resize(3);
  gmm.weights << 0.2, 0.3, 0.5;
  gmm.means.resize(3, 2);
  gmm.means << 0, 0, 10, -5, -8, 4;
  gmm.vars = RowMatrix::Constant(3, 2, 1.5);
  FeatureMatrix fm = MakeFeatures(RowMatrix::Constant(1, 2, 3.0));
  FramePosteriors p =
      ComputePosteriorsUncertain(gmm, fm, testing::ConstantUncertainty(fm, 1e12));
  EXPECT_LT((p.gammas.row(0).transpose() - gmm.weights).cwiseAbs().maxCoeff(),
            1e-3);
}

TEST(UncertainPosteriors, HandComputedInflation) {
  FeatureMatrix fm = testing::SingleFrame(0.0);
  FramePosteriors p = ComputePosteriorsUncertain(
      TwoComponents(0.0, 10.0), fm, testing::ConstantUncertainty(fm, 3.0));
  EXPECT_NEAR(p.gammas(0, 0), 1.0 / (1.0 + std::exp(-12.5)), 1e-15);
  EXPECT_NEAR(p.gammas(0, 1), std::exp(-12.5) / (1.0 + std::exp(-12.5)), 1e-15);
}

TEST(UncertainPosteriors, ContinuousAtZero) {
  std::mt19937_64 rng(25);
  GmmModel gmm = testing::RandomGmm(8, 5, rng);
  FeatureMatrix fm = testing::RandomFeatures(gmm, 40, rng);
  FramePosteriors a = ComputePosteriors(gmm, fm);
  FramePosteriors b = ComputePosteriorsUncertain(
      gmm, fm, testing::ConstantUncertainty(fm, 1e-12));
  EXPECT_LT((a.gammas - b.gammas).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(UncertainPosteriors, RejectsNegativeOrMisshapen) {
  FeatureMatrix fm = testing::SingleFrame(0.0);
  EXPECT_THROW(ComputePosteriorsUncertain(TwoComponents(0, 1), fm,
                                          testing::ConstantUncertainty(fm, -1.0)),
               InvalidArgument);
  UncertaintySequence wide;
  wide.diag_vars = RowMatrix::Zero(1, 2);
  EXPECT_THROW(ComputePosteriorsUncertain(TwoComponents(0, 1), fm, wide),
               DimensionError);
}

TEST(GmmAccumulatorTest, MergeIsAssociative) {
  std::mt19937_64 rng(26);
  GmmModel gmm = testing::RandomGmm(8, 4, rng);
  GmmScorer scorer(gmm);
  RowMatrix frames = testing::RandomFeatures(gmm, 300, rng).frames;
  GmmAccumulator whole(8, 4), a(8, 4), b(8, 4), c(8, 4);
  whole.AccumulateFrames(scorer, frames, 0, 300);
  a.AccumulateFrames(scorer, frames, 0, 70);
  b.AccumulateFrames(scorer, frames, 70, 211);
  c.AccumulateFrames(scorer, frames, 211, 300);
  GmmAccumulator left = a, right = b;
  left.Merge(b);
  left.Merge(c);
  right.Merge(c);
  GmmAccumulator a2 = a;
  a2.Merge(right);
  for (const GmmAccumulator *m : {&left, &a2}) {
    EXPECT_LT((m->occupancy - whole.occupancy).cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_LT((m->first - whole.first).cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_LT((m->second - whole.second).cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_NEAR(m->total_loglik, whole.total_loglik, 1e-8 * std::abs(whole.total_loglik));
    EXPECT_EQ(m->num_frames, 300.0);
  }
}

TEST(TrainUbmTest, SingleComponentIsSampleMoments) {
  std::mt19937_64 rng(27);
  RowMatrix x = testing::RandomMatrix(200, 3, rng, 2.0);
  x.col(1).array() += 5.0;
  FeatureMatrix fm = MakeFeatures(x);
  for (int t = 0; t < 200; t += 7) fm.vad_mask[t] = 0;
  UbmTrainOptions opts;
  opts.num_components = 1;
  opts.num_iters = 3;
  UbmTrainResult res = TrainUbm(std::span<const FeatureMatrix>(&fm, 1), opts);
  Vector mean = Vector::Zero(3), sq = Vector::Zero(3);
  double n = 0;
  for (int t = 0; t < 200; ++t) {
    if (!fm.Voiced(t)) continue;
    mean += x.row(t).transpose();
    n += 1;
  }
  mean /= n;
  for (int t = 0; t < 200; ++t)
    if (fm.Voiced(t)) sq += (x.row(t).transpose() - mean).cwiseAbs2();
  sq /= n;
  EXPECT_DOUBLE_EQ(res.gmm.weights(0), 1.0);
  EXPECT_LT((res.gmm.means.row(0).transpose() - mean).cwiseAbs().maxCoeff(),
            1e-10);
  EXPECT_LT((res.gmm.vars.row(0).transpose() - sq).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(TrainUbmTest, RecoversTwoWellSeparatedGaussians) {
  GenerativeSpec spec;
  spec.num_components = 2;
  spec.feature_dim = 2;
  spec.ivector_dim = 1;
  spec.num_speakers = 4;
  spec.utts_per_speaker = 5;
  spec.frames_per_utt = 500;
  spec.mean_spread = 3.0;
  spec.rng_seed = 28;
  GmmModel truth = SynthUbm(spec);
  TvModel tv = SynthTv(spec, truth);
  tv.t.setZero();
  CorpusBundle corpus = SynthCorpus(spec, truth, tv);
  std::vector<FeatureMatrix> feats;
  for (auto &u : corpus.utterances) feats.push_back(u.clean);
  UbmTrainOptions opts;
  opts.num_components = 2;
  opts.num_iters = 10;
  opts.seed = 3;
  UbmTrainResult res = TrainUbm(feats, opts);
  for (int c = 0; c < 2; ++c) {
    double best = 1e300;
    for (int k = 0; k < 2; ++k)
      best = std::min(best, (res.gmm.means.row(k) - truth.means.row(c))
                                .cwiseAbs()
                                .maxCoeff());
    EXPECT_LT(best, 0.1) << "component " << c;
  }
  for (std::size_t i = 1; i < res.loglik_history.size(); ++i)
    EXPECT_GE(res.loglik_history[i],
              res.loglik_history[i - 1] -
                  1e-8 * std::abs(res.loglik_history[i - 1]));
}

TEST(TrainUbmTest, LogLikelihoodIsMonotone) {
  std::mt19937_64 rng(29);
  GmmModel gen = testing::RandomGmm(8, 3, rng);
  std::vector<FeatureMatrix> feats;
  for (int i = 0; i < 4; ++i) feats.push_back(testing::RandomFeatures(gen, 250, rng));
  UbmTrainOptions opts;
  opts.num_components = 8;
  opts.num_iters = 10;
  UbmTrainResult res = TrainUbm(feats, opts);
  ASSERT_EQ(res.loglik_history.size(), 11u);
  for (std::size_t i = 1; i < res.loglik_history.size(); ++i)
    EXPECT_GE(res.loglik_history[i],
              res.loglik_history[i - 1] -
                  1e-8 * std::abs(res.loglik_history[i - 1]));
  EXPECT_NO_THROW(res.gmm.Validate());
  EXPECT_GE(res.gmm.vars.minCoeff(), kVarianceFloor);
}

TEST(TrainUbmTest, SameSeedSameModel) {
  std::mt19937_64 rng(30);
  GmmModel gen = testing::RandomGmm(4, 2, rng);
  std::vector<FeatureMatrix> feats = {testing::RandomFeatures(gen, 400, rng)};
  UbmTrainOptions opts;
  opts.num_components = 4;
  opts.seed = 5;
  UbmTrainResult a = TrainUbm(feats, opts), b = TrainUbm(feats, opts);
  opts.num_workers = 3;
  UbmTrainResult c = TrainUbm(feats, opts);
  EXPECT_EQ(a.gmm.means, b.gmm.means);
  EXPECT_EQ(a.gmm.means, c.gmm.means);
  EXPECT_EQ(a.gmm.vars, c.gmm.vars);
}

TEST(TrainUbmTest, InsufficientData) {
  std::vector<FeatureMatrix> feats = {MakeFeatures(RowMatrix::Random(15, 2))};
  UbmTrainOptions opts;
  opts.num_components = 2;
  EXPECT_THROW(TrainUbm(feats, opts), InsufficientDataError);
}

TEST(GmmIo, JsonRoundTripAndErrors) {
  std::mt19937_64 rng(31);
  GmmModel gmm = testing::RandomGmm(3, 2, rng);
  GmmModel back = GmmFromJson(GmmToJson(gmm));
  EXPECT_EQ(back.weights, gmm.weights);
  EXPECT_EQ(back.means, gmm.means);
  EXPECT_EQ(back.vars, gmm.vars);
  EXPECT_THROW(GmmFromJson("{not json"), FormatError);
  EXPECT_THROW(GmmFromJson("{\"format_version\": 7}"), FormatError);
  std::string text = GmmToJson(gmm);
  text.replace(text.find("\"dim\": 2"), 8, "\"dim\": 3");
  EXPECT_THROW(GmmFromJson(text), FormatError);
}

}  // namespace
}  // namespace ivup

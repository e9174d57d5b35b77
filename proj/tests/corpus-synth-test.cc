// tests/corpus-synth-test.cc


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


#include <climits>
#include <cmath>
#include <limits>
#include <set>
#include <vector>

#include <gtest/gtest.h>

#include "ivup/bw-stats.h"
#include "ivup/corpus-synth.h"
#include "test-util.h"

namespace ivup {
namespace {

GenerativeSpec Tiny(std::uint64_t seed) {
  GenerativeSpec spec;
  spec.num_speakers = 3;
  spec.utts_per_speaker = 2;
  spec.frames_per_utt = 50;
  spec.feature_dim = 3;
  spec.num_components = 4;
  spec.ivector_dim = 2;
  spec.rng_seed = seed;
  return spec;
}

double Energy(const RowMatrix &m, const std::vector<std::uint8_t> &mask) {
  double e = 0.0;
  for (Eigen::Index t = 0; t < m.rows(); ++t)
    if (mask[t]) e += m.row(t).squaredNorm();
  return e;
}

double Lag1Autocorrelation(const RowMatrix &x) {
  double num = 0.0, den = 0.0;
  for (Eigen::Index f = 0; f < x.cols(); ++f) {
    const double mean = x.col(f).mean();
    for (Eigen::Index t = 0; t < x.rows(); ++t) {
      double a = x(t, f) - mean;
      den += a * a;
      if (t > 0) num += a * (x(t - 1, f) - mean);
    }
  }
  return num / den;
}

TEST(GenerativeSpecTest, Validation) {
  GenerativeSpec spec = Tiny(1);
  EXPECT_NO_THROW(spec.Validate());
  spec.num_speakers = 0;
  EXPECT_THROW(spec.Validate(), InvalidArgument);
  spec = Tiny(1);
  spec.ivector_dim = 13;
  EXPECT_THROW(spec.Validate(), InvalidArgument);
  spec = Tiny(1);
  spec.speaker_shift_scale = -1.0;
  EXPECT_THROW(spec.Validate(), InvalidArgument);
  spec = Tiny(1);
  spec.num_components = INT_MAX;
  spec.feature_dim = INT_MAX;
  EXPECT_THROW(SynthUbm(spec), InvalidArgument);
}

TEST(SynthUbmTest, SingleComponent) {
  GenerativeSpec spec = Tiny(7);
  spec.num_components = 1;
  spec.feature_dim = 1;
  spec.ivector_dim = 1;
  GmmModel gmm = SynthUbm(spec);
  EXPECT_EQ(gmm.weights(0), 1.0);
  EXPECT_GE(gmm.vars(0, 0), 0.5);
  EXPECT_LE(gmm.vars(0, 0), 1.5);
}

TEST(SynthUbmTest, SeparatedAndDeterministic) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    GenerativeSpec spec = Tiny(seed);
    spec.num_components = seed % 2 ? 2 : 32;
    spec.feature_dim = seed % 2 ? 1 : 5;
    spec.ivector_dim = 1;
    GmmModel gmm = SynthUbm(spec);
    EXPECT_NEAR(gmm.weights.sum(), 1.0, 1e-12);
    EXPECT_GE(gmm.vars.minCoeff(), kVarianceFloor);
    const double avg_std = gmm.vars.array().sqrt().mean();
    for (Eigen::Index a = 0; a < gmm.NumComponents(); ++a)
      for (Eigen::Index b = 0; b < a; ++b)
        EXPECT_GE((gmm.means.row(a) - gmm.means.row(b)).norm(), 4.0 * avg_std);
    GmmModel again = SynthUbm(spec);
    EXPECT_EQ(again.means, gmm.means);
    EXPECT_EQ(again.vars, gmm.vars);
    EXPECT_EQ(again.weights, gmm.weights);
  }
}

TEST(SynthCorpusTest, ShapesIdsAndDeterminism) {
  GenerativeSpec spec = Tiny(11);
  GmmModel gmm = SynthUbm(spec);
  TvModel tv = SynthTv(spec, gmm);
  CorpusBundle a = SynthCorpus(spec, gmm, tv), b = SynthCorpus(spec, gmm, tv);
  ASSERT_EQ(a.utterances.size(), 6u);
  std::set<std::string> speakers;
  for (std::size_t i = 0; i < a.utterances.size(); ++i) {
    const auto &u = a.utterances[i];
    speakers.insert(u.speaker_id);
    EXPECT_EQ(u.clean.NumFrames(), 50);
    EXPECT_EQ(u.clean.Dim(), 3);
    EXPECT_EQ(u.true_w.size(), 2);
    EXPECT_EQ(u.clean.frames, b.utterances[i].clean.frames);
    EXPECT_EQ(u.true_w, b.utterances[i].true_w);
  }
  EXPECT_EQ(speakers.size(), 3u);
  EXPECT_EQ(a.utterances[0].utt_id, "spk000-u000");

  CorpusBundle later = SynthCorpus(spec, gmm, tv, 3);
  EXPECT_EQ(later.utterances[0].speaker_id, "spk003");
  EXPECT_NE(later.utterances[0].clean.frames, a.utterances[0].clean.frames);
}

TEST(SynthCorpusTest, DimensionMismatch) {
  GenerativeSpec spec = Tiny(12);
  GmmModel gmm = SynthUbm(spec);
  TvModel tv = SynthTv(spec, gmm);
  tv.v_diag = RowMatrix::Ones(5, 3);
  tv.t = Matrix::Zero(15, 2);
  EXPECT_THROW(SynthCorpus(spec, gmm, tv), DimensionError);
}

TEST(SynthCorpusTest, ZeroLoadingSamplesTheUbm) {
  // Frames assigned to their most likely component average to its mean.
  GenerativeSpec spec = Tiny(13);
  spec.num_speakers = 1;
  spec.utts_per_speaker = 1;
  spec.frames_per_utt = 100000;
  spec.num_components = 3;
  spec.feature_dim = 2;
  spec.mean_spread = 40.0;
  GmmModel gmm = SynthUbm(spec);
  const double avg_std = gmm.vars.array().sqrt().mean();
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < a; ++b)
      ASSERT_GT((gmm.means.row(a) - gmm.means.row(b)).norm(), 8.0 * avg_std);
  TvModel tv = SynthTv(spec, gmm);
  tv.t.setZero();
  const CorpusBundle corpus = SynthCorpus(spec, gmm, tv);
  const FeatureMatrix &fm = corpus.utterances[0].clean;
  RowMatrix gam = ComputePosteriors(gmm, fm).gammas;
  RowMatrix sum = RowMatrix::Zero(3, 2);
  Vector count = Vector::Zero(3);
  for (Eigen::Index t = 0; t < fm.NumFrames(); ++t) {
    Eigen::Index c;
    gam.row(t).maxCoeff(&c);
    sum.row(c) += fm.frames.row(t);
    count(c) += 1.0;
  }
  for (int c = 0; c < 3; ++c) {
    ASSERT_GT(count(c), 100.0);
    for (int f = 0; f < 2; ++f) {
      double se = std::sqrt(gmm.vars(c, f) / count(c));
      EXPECT_NEAR(sum(c, f) / count(c), gmm.means(c, f), 3.0 * se);
    }
  }
}

TEST(SynthCorpusTest, BaselineRecoveryImprovesWithLength) {
  double prev = std::numeric_limits<double>::infinity();
  for (int L : {500, 5000, 50000}) {
    GenerativeSpec spec = Tiny(14);
    spec.num_speakers = 4;
    spec.utts_per_speaker = 2;
    spec.frames_per_utt = L;
    spec.loading_scale = 1.0;
    spec.mean_spread = 20.0;
    GmmModel gmm = SynthUbm(spec);
    TvModel tv = SynthTv(spec, gmm);
    CorpusBundle corpus = SynthCorpus(spec, gmm, tv);
    double err = 0.0;
    for (const auto &u : corpus.utterances)
      err += (ExtractBaseline(tv, gmm, u.clean).mean - u.true_w).norm();
    err /= static_cast<double>(corpus.utterances.size());
    EXPECT_LT(err, prev) << "L=" << L;
    prev = err;
  }
  EXPECT_LT(prev, 0.1);
}

TEST(CorruptTest, HitsTargetSnr) {
  GenerativeSpec spec = Tiny(15);
  spec.frames_per_utt = 300;
  GmmModel gmm = SynthUbm(spec);
  CorpusBundle corpus = SynthCorpus(spec, gmm, SynthTv(spec, gmm));
  FeatureMatrix clean = corpus.utterances[0].clean;
  for (int t = 0; t < 300; t += 4) clean.vad_mask[t] = 0;
  for (double snr : {0.0, 5.0, -7.5, 20.0}) {
    for (NoiseKind kind : {NoiseKind::kWhite, NoiseKind::kColored}) {
      CorruptionSpec cs;
      cs.target_snr_db = snr;
      cs.kind = kind;
      cs.ar_coeff = 0.9;
      cs.rng_seed = 3;
      FeatureMatrix noisy = Corrupt(clean, cs);
      ASSERT_EQ(noisy.frames.rows(), clean.frames.rows());
      double measured =
          10.0 * std::log10(Energy(clean.frames, clean.vad_mask) /
                            Energy(noisy.frames - clean.frames, clean.vad_mask));
      EXPECT_NEAR(measured, snr, 0.1);
      EXPECT_NEAR(MeasureSnrDb(clean, noisy), measured, 1e-9);
    }
  }
}

TEST(CorruptTest, HugeSnrLeavesInput) {
  FeatureMatrix clean = MakeFeatures(RowMatrix::Random(20, 3));
  CorruptionSpec cs;
  cs.target_snr_db = 1000.0;
  FeatureMatrix noisy = Corrupt(clean, cs);
  EXPECT_LT((noisy.frames - clean.frames).cwiseAbs().maxCoeff(),
            std::numeric_limits<double>::epsilon());
  cs.target_snr_db = std::numeric_limits<double>::infinity();
  EXPECT_THROW(Corrupt(clean, cs), InvalidArgument);
  cs.target_snr_db = 0.0;
  cs.kind = NoiseKind::kColored;
  cs.ar_coeff = 1.0;
  EXPECT_THROW(Corrupt(clean, cs), InvalidArgument);
}

TEST(CorruptTest, ColoredNoiseIsCorrelated) {
  FeatureMatrix clean = MakeFeatures(RowMatrix::Random(2000, 4));
  CorruptionSpec white, colored;
  white.target_snr_db = colored.target_snr_db = 0.0;
  white.rng_seed = colored.rng_seed = 8;
  colored.kind = NoiseKind::kColored;
  colored.ar_coeff = 0.9;
  double rw = Lag1Autocorrelation(Corrupt(clean, white).frames - clean.frames);
  double rc = Lag1Autocorrelation(Corrupt(clean, colored).frames - clean.frames);
  EXPECT_GT(rc, rw);
  EXPECT_NEAR(rc, 0.9, 0.05);
  EXPECT_NEAR(rw, 0.0, 0.05);
}

TEST(EnhanceTest, ShrinksTowardGlobalMean) {
  GenerativeSpec spec = Tiny(16);
  spec.frames_per_utt = 400;
  GmmModel gmm = SynthUbm(spec);
  CorpusBundle corpus = SynthCorpus(spec, gmm, SynthTv(spec, gmm));
  CorruptionSpec cs;
  cs.target_snr_db = 0.0;
  FeatureMatrix noisy = Corrupt(corpus.utterances[0].clean, cs);
  FeatureMatrix enh = Enhance(noisy, gmm);
  Vector mu = gmm.means.transpose() * gmm.weights;
  for (Eigen::Index t = 0; t < noisy.NumFrames(); ++t)
    for (Eigen::Index f = 0; f < noisy.Dim(); ++f)
      EXPECT_LE(std::abs(enh.frames(t, f) - mu(f)),
                std::abs(noisy.frames(t, f) - mu(f)) + 1e-12);
  EXPECT_THROW(Enhance(MakeFeatures(RowMatrix::Zero(3, 2)), gmm), DimensionError);
}

TEST(EnhanceTest, NoiseOffsetIsRemoved) {
  GenerativeSpec spec = Tiny(17);
  spec.frames_per_utt = 2000;
  GmmModel gmm = SynthUbm(spec);
  TvModel tv = SynthTv(spec, gmm);
  tv.t.setZero();
  FeatureMatrix clean = SynthCorpus(spec, gmm, tv).utterances[0].clean;
  FeatureMatrix noisy = clean;
  Vector b(3);
  b << 1.5, -2.0, 0.7;
  noisy.frames.rowwise() += b.transpose();
  EnhanceOptions opts;
  opts.noise_mean_iters = 10;
  FeatureMatrix enh = Enhance(noisy, gmm, opts);
  double before = (noisy.frames - clean.frames).squaredNorm();
  double after = (enh.frames - clean.frames).squaredNorm();
  EXPECT_LT(after, 0.05 * before);
}

TEST(OracleUncertaintyTest, Cases) {
  RowMatrix y(1, 2), yb = RowMatrix::Zero(1, 2);
  y << 1.0, 2.0;
  UncertaintySequence u = OracleUncertainty(MakeFeatures(y), MakeFeatures(yb));
  EXPECT_EQ(u.diag_vars(0, 0), 1.0);
  EXPECT_EQ(u.diag_vars(0, 1), 4.0);
  UncertaintySequence swapped =
      OracleUncertainty(MakeFeatures(yb), MakeFeatures(y));
  EXPECT_EQ(swapped.diag_vars, u.diag_vars);
  EXPECT_EQ(OracleUncertainty(MakeFeatures(y), MakeFeatures(y))
                .diag_vars.cwiseAbs()
                .maxCoeff(),
            0.0);
  EXPECT_THROW(OracleUncertainty(MakeFeatures(y),
                                 MakeFeatures(RowMatrix::Zero(2, 2))),
               DimensionError);
}

TEST(OracleUncertaintyTest, ZeroExactlyWhereEqual) {
  RowMatrix a = RowMatrix::Random(30, 4), b = a;
  for (int t = 0; t < 30; t += 3) b(t, t % 4) += 1e-9;
  UncertaintySequence u = OracleUncertainty(MakeFeatures(a), MakeFeatures(b));
  EXPECT_GE(u.diag_vars.minCoeff(), 0.0);
  for (int t = 0; t < 30; ++t)
    for (int f = 0; f < 4; ++f)
      EXPECT_EQ(u.diag_vars(t, f) == 0.0, a(t, f) == b(t, f));
}

TEST(CorpusIo, RoundTrip) {
  auto dir = testing::ScratchDir("corpus");
  GenerativeSpec spec = Tiny(18);
  GmmModel gmm = SynthUbm(spec);
  CorpusBundle a = SynthCorpus(spec, gmm, SynthTv(spec, gmm));
  WriteCorpus(dir, a);
  CorpusBundle b = ReadCorpus(dir);
  ASSERT_EQ(b.utterances.size(), a.utterances.size());
  for (std::size_t i = 0; i < a.utterances.size(); ++i) {
    EXPECT_EQ(b.utterances[i].utt_id, a.utterances[i].utt_id);
    EXPECT_EQ(b.utterances[i].speaker_id, a.utterances[i].speaker_id);
    EXPECT_EQ(b.utterances[i].clean.frames, a.utterances[i].clean.frames);
    EXPECT_EQ(b.utterances[i].true_w, a.utterances[i].true_w);
  }
  EXPECT_EQ(b.gmm.means, a.gmm.means);
  EXPECT_EQ(b.tv.t, a.tv.t);
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace ivup

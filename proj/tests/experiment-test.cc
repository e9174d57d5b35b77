// tests/experiment-test.cc


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
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "ivup/experiment.h"
#include "test-util.h"

namespace ivup {
namespace {

ExperimentConfig SmallConfig() {
  ExperimentConfig c;
  c.corpus.train_speakers = 8;
  c.corpus.train_utts_per_speaker = 3;
  c.corpus.eval_speakers = 4;
  c.corpus.eval_utts_per_speaker = 4;
  c.corpus.frames_per_utt = 120;
  c.corpus.num_components = 4;
  c.frontend.feature_dim = 5;
  c.ubm.num_components = 4;
  c.ubm.num_iters = 3;
  c.tv.ivector_dim = 3;
  c.tv.num_iters = 3;
  c.backend.plda_iters = 3;
  c.output.histogram_bins = 8;
  c.seed = 7;
  return c;
}

TEST(ExperimentConfigTest, DefaultsAndPartialOverride) {
  ExperimentConfig d = ExperimentConfigFromJson("{}");
  EXPECT_EQ(d.corpus.num_components, 64);
  EXPECT_EQ(d.frontend.feature_dim, 39);
  EXPECT_EQ(d.tv.ivector_dim, 32);
  EXPECT_EQ(d.uncertainty.mode, "oracle");
  ExperimentConfig c = ExperimentConfigFromJson(
      R"({"tv": {"ivector_dim": 8}, "seed": 12, "uncertainty": {"snr_db": 0}})");
  EXPECT_EQ(c.tv.ivector_dim, 8);
  EXPECT_EQ(c.tv.num_iters, d.tv.num_iters);
  EXPECT_EQ(c.seed, 12u);
  EXPECT_EQ(c.uncertainty.snr_db, 0.0);
}

TEST(ExperimentConfigTest, JsonRoundTrip) {
  ExperimentConfig c = SmallConfig();
  c.backend.scoring = "cosine";
  c.uncertainty.noise = "white";
  ExperimentConfig back = ExperimentConfigFromJson(ExperimentConfigToJson(c));
  EXPECT_EQ(ExperimentConfigToJson(back), ExperimentConfigToJson(c));
}

TEST(ExperimentConfigTest, Rejections) {
  EXPECT_THROW(ExperimentConfigFromJson(R"({"bogus": 1})"), FormatError);
  EXPECT_THROW(ExperimentConfigFromJson(R"({"tv": {"dim": 1}})"), FormatError);
  EXPECT_THROW(ExperimentConfigFromJson(R"({"tv": 3})"), FormatError);
  EXPECT_THROW(ExperimentConfigFromJson(R"({"tv": {"ivector_dim": "x"}})"),
               FormatError);
  EXPECT_THROW(ExperimentConfigFromJson("[1,"), FormatError);
  EXPECT_THROW(ExperimentConfigFromJson(R"({"tv": {"ivector_dim": 0}})"),
               InvalidArgument);
  EXPECT_THROW(
      ExperimentConfigFromJson(R"({"backend": {"scoring": "svm"}})"),
      InvalidArgument);
  EXPECT_THROW(
      ExperimentConfigFromJson(R"({"uncertainty": {"mode": "guess"}})"),
      InvalidArgument);
  EXPECT_THROW(ExperimentConfigFromJson(
                   R"({"corpus": {"eval_utts_per_speaker": 2}})"),
               InvalidArgument);
  EXPECT_THROW(ExperimentConfigFromJson(R"({"num_workers": 0})"),
               InvalidArgument);
}

TEST(Experiment, ZeroUncertaintyMethodsCoincide) {
  ExperimentConfig c = SmallConfig();
  c.uncertainty.mode = "zero";
  ExperimentResult r = RunExperiment(c);
  const auto &enh = r.Method("baseline-enhanced").scores;
  for (const char *name : {"up-fa", "up-ubm", "up-proposed"}) {
    const auto &s = r.Method(name).scores;
    ASSERT_EQ(s.size(), enh.size());
    for (std::size_t k = 0; k < s.size(); ++k)
      EXPECT_NEAR(s[k], enh[k], 1e-8 * (1.0 + std::abs(enh[k]))) << name;
  }
  for (std::size_t k = 0; k < r.cosine.biased.size(); ++k)
    EXPECT_EQ(r.cosine.biased[k], r.cosine.unbiased[k]);
}

TEST(Experiment, ShapesAndOutputs) {
  ExperimentConfig c = SmallConfig();
  auto dir = testing::ScratchDir("experiment");
  ExperimentResult r = RunExperiment(c, dir);
  // 2 enrollment and 2 test utterances per speaker, 4 speakers.
  EXPECT_EQ(r.trials.size(), 8u * 8u);
  std::size_t targets = 0;
  for (const auto &t : r.trials) targets += t.target;
  EXPECT_EQ(targets, 4u * 2u * 2u);
  ASSERT_EQ(r.methods.size(), 6u);
  for (const auto &m : r.methods) {
    EXPECT_EQ(m.scores.size(), r.trials.size());
    EXPECT_GE(m.report.eer, 0.0);
    EXPECT_LE(m.report.eer, 1.0);
    EXPECT_TRUE(std::filesystem::exists(dir / ("det_" + m.name + ".csv")));
    EXPECT_TRUE(std::filesystem::exists(dir / ("scores_" + m.name + ".csv")));
  }
  EXPECT_EQ(r.ubm_loglik.size(), 4u);
  EXPECT_EQ(r.tv_objective.size(), 4u);
  EXPECT_NEAR(r.mean_test_snr_db, c.uncertainty.snr_db, 1e-9);
  EXPECT_TRUE(std::filesystem::exists(dir / "summary.json"));
  EXPECT_TRUE(std::filesystem::exists(dir / "fstat_cosine.csv"));
  EXPECT_THROW(r.Method("nope"), InvalidArgument);
  std::filesystem::remove_all(dir);
}

TEST(Experiment, DeterministicAcrossWorkers) {
  ExperimentConfig c = SmallConfig();
  ExperimentResult a = RunExperiment(c);
  c.num_workers = 3;
  ExperimentResult b = RunExperiment(c);
  EXPECT_EQ(SummaryJson(c, a), SummaryJson(c, b));
  for (std::size_t m = 0; m < a.methods.size(); ++m)
    EXPECT_EQ(a.methods[m].scores, b.methods[m].scores);
  c.seed = 8;
  EXPECT_NE(SummaryJson(c, RunExperiment(c)), SummaryJson(c, a));
}

}  // namespace
}  // namespace ivup

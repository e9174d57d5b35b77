// ivup/experiment.h

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

#ifndef IVUP_EXPERIMENT_H_
#define IVUP_EXPERIMENT_H_

// The end-to-end synthetic verification experiment: generate train and
// evaluation speakers, corrupt and enhance the test side, train UBM, TV and
// back-end on clean training data, and score one trial list per method.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ivup/corpus-synth.h"
#include "ivup/eval.h"

namespace ivup {

struct ExperimentConfig {
  struct Corpus {
    int train_speakers = 40;
    int train_utts_per_speaker = 8;
    int eval_speakers = 20;
    int eval_utts_per_speaker = 10;
    int frames_per_utt = 300;
    int num_components = 64;  // of the generating GMM
    double speaker_shift_scale = 2.0;
    double loading_scale = 0.07;
    double mean_spread = 2.0;
  } corpus;
  struct Frontend {
    int feature_dim = 39;
  } frontend;
  struct Ubm {
    int num_components = 64;
    int num_iters = 10;
    int kmeans_iters = 2;
  } ubm;
  struct Tv {
    int ivector_dim = 32;
    int num_iters = 10;
  } tv;
  struct Backend {
    int lda_dim = 0;  // 0: min(D, train_speakers - 1)
    int plda_iters = 10;
    std::string scoring = "plda";  // or "cosine"
  } backend;
  struct Uncertainty {
    double snr_db = 5.0;
    std::string noise = "colored";  // or "white"
    double ar_coeff = 0.995;
    int noise_mean_iters = 3;  // enhancer noise-offset estimation
    std::string mode = "oracle";  // or "zero"
  } uncertainty;
  struct Trials {
    int enroll_per_speaker = 2;
    bool corrupt_enroll = false;
  } trials;
  struct Output {
    int histogram_bins = 50;
    bool write_scores = true;
  } output;

  std::uint64_t seed = 0;
  int num_workers = 1;  // never affects the results

  void Validate() const;
};

/// Parses the JSON config; absent keys keep their defaults, unknown keys are
/// rejected.
ExperimentConfig ExperimentConfigFromJson(const std::string &text);
std::string ExperimentConfigToJson(const ExperimentConfig &cfg);
ExperimentConfig ReadExperimentConfig(const std::filesystem::path &path);

struct MethodResult {
  std::string name;
  std::vector<double> scores;  // aligned with ExperimentResult::trials
  EvalReport report;
};

struct ExperimentResult {
  std::vector<Trial> trials;
  // baseline-clean, baseline-noisy, baseline-enhanced, up-fa, up-ubm,
  // up-proposed.
  std::vector<MethodResult> methods;
  CosineReport cosine;
  std::vector<double> ubm_loglik;
  std::vector<double> tv_objective;
  std::vector<double> plda_loglik;
  double mean_test_snr_db = 0.0;

  const MethodResult &Method(const std::string &name) const;
};

/// Runs the whole pipeline. When `out_dir` is non-empty, score, DET,
/// histogram and cosine files plus summary.json are written there.
ExperimentResult RunExperiment(const ExperimentConfig &cfg,
                               const std::filesystem::path &out_dir = {});

/// Summary JSON: per-method {eer, threshold, n_trials}, the ordering checks
/// and the statistic cosine means. Depends only on the config and the seed.
std::string SummaryJson(const ExperimentConfig &cfg,
                        const ExperimentResult &result);

}  // namespace ivup

#endif  // IVUP_EXPERIMENT_H_

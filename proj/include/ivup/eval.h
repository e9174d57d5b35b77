// ivup/eval.h

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

#ifndef IVUP_EVAL_H_
#define IVUP_EVAL_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "ivup/bw-stats.h"
#include "ivup/common.h"

namespace ivup {

struct Trial {
  std::string enroll_id;
  std::string test_id;
  bool target = false;
};

/// One "enroll<TAB>test<TAB>target|nontarget" per line.
std::vector<Trial> ReadTrials(const std::filesystem::path &path);
void WriteTrials(const std::filesystem::path &path,
                 std::span<const Trial> trials);

struct EerResult {
  double eer = 0.0;
  double threshold = 0.0;
};

/// A trial is accepted when score > threshold. Candidate thresholds lie
/// below the lowest score, at midpoints between consecutive distinct scores
/// and above the highest score; the one minimising |fa - miss| wins (lowest
/// threshold on ties) and EER = (fa + miss) / 2 there. `is_target` is 1 for
/// target trials.
EerResult ComputeEer(std::span<const double> scores,
                     std::span<const std::uint8_t> is_target);

struct DetPoint {
  double threshold = 0.0;
  double false_alarm = 0.0;
  double miss = 0.0;
};

/// One point per candidate threshold of ComputeEer, ascending threshold
/// (false alarms non-increasing, misses non-decreasing).
std::vector<DetPoint> DetPoints(std::span<const double> scores,
                                std::span<const std::uint8_t> is_target);

struct Histogram {
  double lo = 0.0;
  double hi = 0.0;
  double scale = 1.0;  // the scores were divided by this before binning
  std::vector<std::vector<std::size_t>> counts;  // one row per input set
};

/// Common equal-width bins over all sets. With normalize_by_max every score
/// is first divided by the largest absolute score across the sets.
Histogram ScoreHistogram(std::span<const std::vector<double>> sets,
                         int num_bins, bool normalize_by_max);

struct EvalReport {
  double eer = 0.0;
  double eer_threshold = 0.0;
  std::size_t num_trials = 0;
  std::size_t num_targets = 0;
  std::vector<DetPoint> det;
  Histogram histogram;  // rows: nontarget, target
};

EvalReport Evaluate(std::span<const double> scores,
                    std::span<const std::uint8_t> is_target, int num_bins = 50);

/// CSV "enroll_id,test_id,score,label".
void WriteScoresCsv(const std::filesystem::path &path,
                    std::span<const Trial> trials,
                    std::span<const double> scores);
void ReadScoresCsv(const std::filesystem::path &path, std::vector<Trial> *trials,
                   std::vector<double> *scores);

void WriteDetCsv(const std::filesystem::path &path,
                 std::span<const DetPoint> det);
void WriteHistogramCsv(const std::filesystem::path &path, const Histogram &hist,
                       std::span<const std::string> set_names);

struct CosineReport {
  std::vector<double> biased;    // per trial, 1 - cos
  std::vector<double> unbiased;  // per trial, 1 - cos
  double biased_target_mean = 0.0;
  double biased_nontarget_mean = 0.0;
  double unbiased_target_mean = 0.0;
  double unbiased_nontarget_mean = 0.0;
};

/// First-order statistic cosine distances of every trial for two
/// statistics sets keyed by utterance id.
CosineReport FstatCosineReport(std::span<const Trial> trials,
                               const std::map<std::string, BwStats> &biased,
                               const std::map<std::string, BwStats> &unbiased);

void WriteCosineReportCsv(const std::filesystem::path &path,
                          std::span<const Trial> trials,
                          const CosineReport &report);

}  // namespace ivup

#endif  // IVUP_EVAL_H_

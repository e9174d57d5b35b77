// eval.cc

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

#include "ivup/eval.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace ivup {

namespace {

std::string FormatDouble(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double ParseDouble(const std::string &s, const std::string &where) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw FormatError(where + ": bad number '" + s + "'");
  return v;
}

std::ofstream OpenText(const std::filesystem::path &path) {
  std::ofstream os(path);
  if (!os) throw Error("cannot open '" + path.string() + "' for writing");
  return os;
}

// Sweep of the score-sorted trials. Cut i accepts sorted[i..n); cuts are
// taken only between distinct scores, plus the two extremes.
struct Sweep {
  std::vector<double> thresholds;
  std::vector<double> fa;
  std::vector<double> miss;
};

Sweep SweepThresholds(std::span<const double> scores,
                      std::span<const std::uint8_t> is_target) {
  if (scores.size() != is_target.size())
    throw DimensionError("scores and labels differ in length");
  std::size_t num_tgt = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!std::isfinite(scores[i]))
      throw NonFiniteError("non-finite score at trial " + std::to_string(i));
    if (is_target[i]) ++num_tgt;
  }
  const std::size_t n = scores.size(), num_non = n - num_tgt;
  if (num_tgt == 0 || num_non == 0)
    throw InvalidArgument("EER needs both target and nontarget trials");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] < scores[b];
  });

  Sweep sw;
  std::size_t tgt_below = 0, non_below = 0;
  auto push = [&](double thr) {
    sw.thresholds.push_back(thr);
    sw.fa.push_back(static_cast<double>(num_non - non_below) / num_non);
    sw.miss.push_back(static_cast<double>(tgt_below) / num_tgt);
  };
  push(scores[order.front()] - 1.0);
  for (std::size_t i = 0; i < n;) {
    const double v = scores[order[i]];
    std::size_t j = i;
    for (; j < n && scores[order[j]] == v; ++j)
      (is_target[order[j]] ? tgt_below : non_below)++;
    push(j < n ? 0.5 * (v + scores[order[j]]) : v + 1.0);
    i = j;
  }
  return sw;
}

}  // namespace

std::vector<Trial> ReadTrials(const std::filesystem::path &path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open trial list '" + path.string() + "'");
  std::vector<Trial> trials;
  std::string line;
  for (int lineno = 1; std::getline(is, line); ++lineno) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    Trial t;
    std::string label;
    if (!std::getline(ss, t.enroll_id, '\t') ||
        !std::getline(ss, t.test_id, '\t') || !std::getline(ss, label))
      throw FormatError(path.string() + ":" + std::to_string(lineno) +
                        ": expected three tab-separated fields");
    if (label == "target") {
      t.target = true;
    } else if (label != "nontarget") {
      throw FormatError(path.string() + ":" + std::to_string(lineno) +
                        ": label must be target or nontarget");
    }
    trials.push_back(std::move(t));
  }
  return trials;
}

void WriteTrials(const std::filesystem::path &path,
                 std::span<const Trial> trials) {
  auto os = OpenText(path);
  for (const auto &t : trials)
    os << t.enroll_id << '\t' << t.test_id << '\t'
       << (t.target ? "target" : "nontarget") << '\n';
  if (!os) throw Error("write failed for '" + path.string() + "'");
}

EerResult ComputeEer(std::span<const double> scores,
                     std::span<const std::uint8_t> is_target) {
  Sweep sw = SweepThresholds(scores, is_target);
  std::size_t best = 0;
  for (std::size_t k = 1; k < sw.thresholds.size(); ++k)
    if (std::abs(sw.fa[k] - sw.miss[k]) < std::abs(sw.fa[best] - sw.miss[best]))
      best = k;
  return {0.5 * (sw.fa[best] + sw.miss[best]), sw.thresholds[best]};
}

std::vector<DetPoint> DetPoints(std::span<const double> scores,
                                std::span<const std::uint8_t> is_target) {
  Sweep sw = SweepThresholds(scores, is_target);
  std::vector<DetPoint> out(sw.thresholds.size());
  for (std::size_t k = 0; k < out.size(); ++k)
    out[k] = {sw.thresholds[k], sw.fa[k], sw.miss[k]};
  return out;
}

Histogram ScoreHistogram(std::span<const std::vector<double>> sets,
                         int num_bins, bool normalize_by_max) {
  if (num_bins < 1) throw InvalidArgument("histogram needs at least one bin");
  double max_abs = 0.0, lo = INFINITY, hi = -INFINITY;
  std::size_t total = 0;
  for (const auto &s : sets)
    for (double v : s) {
      if (!std::isfinite(v)) throw NonFiniteError("non-finite score");
      max_abs = std::max(max_abs, std::abs(v));
      ++total;
    }
  if (total == 0) throw InvalidArgument("histogram of no scores");
  Histogram h;
  h.scale = (normalize_by_max && max_abs > 0.0) ? max_abs : 1.0;
  for (const auto &s : sets)
    for (double v : s) {
      lo = std::min(lo, v / h.scale);
      hi = std::max(hi, v / h.scale);
    }
  h.lo = lo;
  h.hi = hi;
  const double width = (hi - lo) / num_bins;
  for (const auto &s : sets) {
    std::vector<std::size_t> counts(num_bins, 0);
    for (double v : s) {
      int b = 0;
      if (width > 0.0)
        b = std::clamp(static_cast<int>((v / h.scale - lo) / width), 0,
                       num_bins - 1);
      ++counts[b];
    }
    h.counts.push_back(std::move(counts));
  }
  return h;
}

EvalReport Evaluate(std::span<const double> scores,
                    std::span<const std::uint8_t> is_target, int num_bins) {
  EvalReport r;
  EerResult eer = ComputeEer(scores, is_target);
  r.eer = eer.eer;
  r.eer_threshold = eer.threshold;
  r.num_trials = scores.size();
  r.det = DetPoints(scores, is_target);
  std::vector<std::vector<double>> sets(2);
  for (std::size_t i = 0; i < scores.size(); ++i) {
    sets[is_target[i] ? 1 : 0].push_back(scores[i]);
    if (is_target[i]) ++r.num_targets;
  }
  r.histogram = ScoreHistogram(sets, num_bins, true);
  return r;
}

void WriteScoresCsv(const std::filesystem::path &path,
                    std::span<const Trial> trials,
                    std::span<const double> scores) {
  if (trials.size() != scores.size())
    throw DimensionError("one score per trial required");
  auto os = OpenText(path);
  os << "enroll_id,test_id,score,label\n";
  for (std::size_t i = 0; i < trials.size(); ++i)
    os << trials[i].enroll_id << ',' << trials[i].test_id << ','
       << FormatDouble(scores[i]) << ','
       << (trials[i].target ? "target" : "nontarget") << '\n';
  if (!os) throw Error("write failed for '" + path.string() + "'");
}

void ReadScoresCsv(const std::filesystem::path &path, std::vector<Trial> *trials,
                   std::vector<double> *scores) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open scores '" + path.string() + "'");
  std::string line;
  if (!std::getline(is, line) || line != "enroll_id,test_id,score,label")
    throw FormatError(path.string() + ": missing scores header");
  trials->clear();
  scores->clear();
  for (int lineno = 2; std::getline(is, line); ++lineno) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    Trial t;
    std::string score, label;
    const std::string where = path.string() + ":" + std::to_string(lineno);
    if (!std::getline(ss, t.enroll_id, ',') ||
        !std::getline(ss, t.test_id, ',') || !std::getline(ss, score, ',') ||
        !std::getline(ss, label))
      throw FormatError(where + ": expected four fields");
    if (label != "target" && label != "nontarget")
      throw FormatError(where + ": bad label '" + label + "'");
    t.target = label == "target";
    scores->push_back(ParseDouble(score, where));
    trials->push_back(std::move(t));
  }
}

void WriteDetCsv(const std::filesystem::path &path,
                 std::span<const DetPoint> det) {
  auto os = OpenText(path);
  os << "threshold,false_alarm,miss\n";
  for (const auto &p : det)
    os << FormatDouble(p.threshold) << ',' << FormatDouble(p.false_alarm) << ','
       << FormatDouble(p.miss) << '\n';
  if (!os) throw Error("write failed for '" + path.string() + "'");
}

void WriteHistogramCsv(const std::filesystem::path &path, const Histogram &hist,
                       std::span<const std::string> set_names) {
  if (set_names.size() != hist.counts.size())
    throw DimensionError("one name per histogram set required");
  auto os = OpenText(path);
  os << "bin_lo,bin_hi";
  for (const auto &n : set_names) os << ',' << n;
  os << '\n';
  const std::size_t bins = hist.counts.empty() ? 0 : hist.counts[0].size();
  const double width = bins ? (hist.hi - hist.lo) / bins : 0.0;
  for (std::size_t b = 0; b < bins; ++b) {
    os << FormatDouble(hist.lo + b * width) << ','
       << FormatDouble(hist.lo + (b + 1) * width);
    for (const auto &c : hist.counts) os << ',' << c[b];
    os << '\n';
  }
  if (!os) throw Error("write failed for '" + path.string() + "'");
}

CosineReport FstatCosineReport(std::span<const Trial> trials,
                               const std::map<std::string, BwStats> &biased,
                               const std::map<std::string, BwStats> &unbiased) {
  auto lookup = [](const std::map<std::string, BwStats> &m,
                   const std::string &id) -> const BwStats & {
    auto it = m.find(id);
    if (it == m.end()) throw InvalidArgument("no statistics for '" + id + "'");
    return it->second;
  };
  CosineReport r;
  double n_tgt = 0.0, n_non = 0.0;
  for (const auto &t : trials) {
    const double b = FstatCosine(lookup(biased, t.enroll_id),
                                 lookup(biased, t.test_id));
    const double u = FstatCosine(lookup(unbiased, t.enroll_id),
                                 lookup(unbiased, t.test_id));
    r.biased.push_back(b);
    r.unbiased.push_back(u);
    if (t.target) {
      r.biased_target_mean += b;
      r.unbiased_target_mean += u;
      n_tgt += 1.0;
    } else {
      r.biased_nontarget_mean += b;
      r.unbiased_nontarget_mean += u;
      n_non += 1.0;
    }
  }
  if (n_tgt > 0.0) {
    r.biased_target_mean /= n_tgt;
    r.unbiased_target_mean /= n_tgt;
  }
  if (n_non > 0.0) {
    r.biased_nontarget_mean /= n_non;
    r.unbiased_nontarget_mean /= n_non;
  }
  return r;
}

void WriteCosineReportCsv(const std::filesystem::path &path,
                          std::span<const Trial> trials,
                          const CosineReport &report) {
  if (trials.size() != report.biased.size())
    throw DimensionError("cosine report does not match the trial list");
  auto os = OpenText(path);
  os << "enroll_id,test_id,label,biased,unbiased\n";
  for (std::size_t i = 0; i < trials.size(); ++i)
    os << trials[i].enroll_id << ',' << trials[i].test_id << ','
       << (trials[i].target ? "target" : "nontarget") << ','
       << FormatDouble(report.biased[i]) << ','
       << FormatDouble(report.unbiased[i]) << '\n';
  if (!os) throw Error("write failed for '" + path.string() + "'");
}

}  // namespace ivup

// frontend.cc

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
#include <mutex>
#include <numbers>

#include <fftw3.h>

#include "ivup/frontend.h"

namespace ivup {

Eigen::Index FeatureMatrix::NumVoiced() const {
  Eigen::Index n = 0;
  for (auto v : vad_mask) n += (v != 0);
  return n;
}

void FeatureMatrix::Validate() const {
  if (frames.rows() == 0 || frames.cols() == 0)
    throw InvalidArgument("feature matrix '" + utt_id + "' is empty");
  if (static_cast<Eigen::Index>(vad_mask.size()) != frames.rows())
    throw DimensionError("VAD mask length does not match frame count for '" +
                         utt_id + "'");
  if (log_energy_dim >= frames.cols())
    throw DimensionError("log-energy column out of range");
  CheckFinite(frames, "features '" + utt_id + "'");
}

FeatureMatrix MakeFeatures(RowMatrix frames, std::string utt_id) {
  FeatureMatrix fm;
  fm.vad_mask.assign(frames.rows(), 1);
  fm.frames = std::move(frames);
  fm.utt_id = std::move(utt_id);
  return fm;
}

void UncertaintySequence::Validate() const {
  CheckFinite(diag_vars, "uncertainty '" + utt_id + "'");
  if ((diag_vars.array() < 0.0).any())
    throw InvalidArgument("uncertainty '" + utt_id +
                          "' has a negative variance");
}

void UncertaintySequence::ValidateAgainst(const FeatureMatrix &fm) const {
  if (diag_vars.rows() != fm.NumFrames() || diag_vars.cols() != fm.Dim())
    throw DimensionError("uncertainty shape does not match features for '" +
                         fm.utt_id + "'");
  Validate();
}

UncertaintySequence ZeroUncertainty(const FeatureMatrix &fm) {
  return {RowMatrix::Zero(fm.NumFrames(), fm.Dim()), fm.utt_id};
}

int MfccConfig::WindowSamples() const {
  return static_cast<int>(std::lround(sample_rate_hz * window_ms / 1000.0));
}

int MfccConfig::HopSamples() const {
  return static_cast<int>(std::lround(sample_rate_hz * hop_ms / 1000.0));
}

void MfccConfig::Validate() const {
  if (num_ceps < 1 || num_ceps >= num_mel_filters)
    throw InvalidArgument("MFCC: need 1 <= num_ceps < num_mel_filters");
  if (!(sample_rate_hz > 0.0) || !(window_ms > 0.0) || !(hop_ms > 0.0))
    throw InvalidArgument("MFCC: rates and durations must be positive");
  if (hop_ms > window_ms) throw InvalidArgument("MFCC: hop exceeds window");
  if (WindowSamples() < 2 || HopSamples() < 1)
    throw InvalidArgument("MFCC: window too short at this sample rate");
  if (!(low_freq_hz >= 0.0) || low_freq_hz >= sample_rate_hz / 2)
    throw InvalidArgument("MFCC: bad low frequency");
}

namespace {

double MelScale(double hz) { return 1127.0 * std::log1p(hz / 700.0); }

// Triangular filters on the mel axis, evaluated at FFT bin frequencies.
// Row m holds the weights of filter m over bins [0, nfft/2].
Matrix MelBanks(const MfccConfig &cfg, int nfft) {
  const int num_bins = nfft / 2 + 1;
  const double nyquist = cfg.sample_rate_hz / 2.0;
  const double mel_lo = MelScale(cfg.low_freq_hz);
  const double mel_hi = MelScale(nyquist);
  const double step = (mel_hi - mel_lo) / (cfg.num_mel_filters + 1);
  Matrix banks = Matrix::Zero(cfg.num_mel_filters, num_bins);
  for (int m = 0; m < cfg.num_mel_filters; ++m) {
    double left = mel_lo + m * step, center = left + step,
           right = center + step;
    for (int k = 0; k < num_bins; ++k) {
      double mel = MelScale(k * cfg.sample_rate_hz / nfft);
      if (mel > left && mel < right)
        banks(m, k) = mel <= center ? (mel - left) / (center - left)
                                    : (right - mel) / (right - center);
    }
  }
  return banks;
}

// FFTW planning is not thread-safe; execution on fresh arrays is.
std::mutex g_fftw_plan_mutex;

// Used only to keep log() finite on digital silence.
constexpr double kLogFloor = 1e-300;

}  // namespace

FeatureMatrix ExtractMfcc(std::span<const double> waveform,
                          const MfccConfig &cfg, std::string utt_id) {
  cfg.Validate();
  const int window = cfg.WindowSamples();
  const int hop = cfg.HopSamples();
  if (static_cast<long>(waveform.size()) < window)
    throw InvalidArgument("waveform shorter than one analysis window");
  for (double s : waveform)
    if (!std::isfinite(s)) throw NonFiniteError("waveform: non-finite sample");

  const long num_frames = (static_cast<long>(waveform.size()) - window) / hop + 1;
  int nfft = 1;
  while (nfft < window) nfft <<= 1;
  const int num_bins = nfft / 2 + 1;
  const Matrix banks = MelBanks(cfg, nfft);

  Vector hamming(window);
  for (int n = 0; n < window; ++n)
    hamming(n) = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * n / (window - 1));

  // Orthonormal DCT-II rows 1..num_ceps; row 0 (c0) is not used.
  const int M = cfg.num_mel_filters;
  Matrix dct(cfg.num_ceps, M);
  for (int k = 1; k <= cfg.num_ceps; ++k)
    for (int m = 0; m < M; ++m)
      dct(k - 1, m) = std::sqrt(2.0 / M) *
                      std::cos(std::numbers::pi * k * (m + 0.5) / M);

  double *in = fftw_alloc_real(nfft);
  fftw_complex *out = fftw_alloc_complex(num_bins);
  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(g_fftw_plan_mutex);
    plan = fftw_plan_dft_r2c_1d(nfft, in, out, FFTW_ESTIMATE);
  }

  const int dim = cfg.num_ceps + (cfg.append_log_energy ? 1 : 0);
  FeatureMatrix fm;
  fm.frames.resize(num_frames, dim);
  fm.vad_mask.assign(num_frames, 1);
  fm.utt_id = std::move(utt_id);
  fm.frame_rate_hz = 1000.0 / cfg.hop_ms;
  fm.kind = FeatureKind::kMfcc;
  fm.log_energy_dim = cfg.append_log_energy ? cfg.num_ceps : -1;

  Vector power(num_bins), log_mel(M);
  for (long t = 0; t < num_frames; ++t) {
    const double *frame = waveform.data() + t * hop;
    double energy = 0.0;
    for (int n = 0; n < window; ++n) energy += frame[n] * frame[n];
    // Pre-emphasis inside the frame, first sample replicated.
    for (int n = window - 1; n >= 0; --n) {
      double prev = n > 0 ? frame[n - 1] : frame[0];
      in[n] = (frame[n] - cfg.preemph * prev) * hamming(n);
    }
    std::fill(in + window, in + nfft, 0.0);
    fftw_execute_dft_r2c(plan, in, out);
    for (int k = 0; k < num_bins; ++k)
      power(k) = out[k][0] * out[k][0] + out[k][1] * out[k][1];
    log_mel = (banks * power).array().max(kLogFloor).log();
    fm.frames.row(t).head(cfg.num_ceps) = (dct * log_mel).transpose();
    if (cfg.append_log_energy)
      fm.frames(t, cfg.num_ceps) = std::log(std::max(energy, kLogFloor));
  }

  {
    std::lock_guard<std::mutex> lock(g_fftw_plan_mutex);
    fftw_destroy_plan(plan);
  }
  fftw_free(in);
  fftw_free(out);
  return fm;
}

namespace {

// Regression delta of every column with edge replication.
RowMatrix Delta(const RowMatrix &x, int window, bool squared_coeffs) {
  const Eigen::Index L = x.rows();
  double denom = 0.0;
  for (int k = 1; k <= window; ++k) denom += k * k;
  denom *= 2.0;
  RowMatrix d = RowMatrix::Zero(L, x.cols());
  for (Eigen::Index t = 0; t < L; ++t) {
    for (int k = 1; k <= window; ++k) {
      Eigen::Index fwd = std::min<Eigen::Index>(t + k, L - 1);
      Eigen::Index bwd = std::max<Eigen::Index>(t - k, 0);
      double w = k / denom;
      if (squared_coeffs)
        d.row(t) += (w * w) * (x.row(fwd) + x.row(bwd));
      else
        d.row(t) += w * (x.row(fwd) - x.row(bwd));
    }
  }
  return d;
}

}  // namespace

FeatureMatrix AppendDeltas(const FeatureMatrix &fm, int delta_window) {
  if (delta_window < 1) throw InvalidArgument("delta window must be >= 1");
  if (fm.NumFrames() <= 2 * delta_window)
    throw InvalidArgument("utterance '" + fm.utt_id +
                          "' too short for delta computation");
  const Eigen::Index F = fm.Dim();
  RowMatrix d1 = Delta(fm.frames, delta_window, false);
  RowMatrix d2 = Delta(d1, delta_window, false);
  FeatureMatrix out = fm;
  out.frames.resize(fm.NumFrames(), 3 * F);
  out.frames.leftCols(F) = fm.frames;
  out.frames.middleCols(F, F) = d1;
  out.frames.rightCols(F) = d2;
  return out;
}

UncertaintySequence AppendDeltaUncertainty(const UncertaintySequence &unc,
                                           int delta_window) {
  if (delta_window < 1) throw InvalidArgument("delta window must be >= 1");
  if (unc.NumFrames() <= 2 * delta_window)
    throw InvalidArgument("uncertainty too short for delta computation");
  const Eigen::Index F = unc.Dim();
  RowMatrix v1 = Delta(unc.diag_vars, delta_window, true);
  RowMatrix v2 = Delta(v1, delta_window, true);
  UncertaintySequence out;
  out.utt_id = unc.utt_id;
  out.diag_vars.resize(unc.NumFrames(), 3 * F);
  out.diag_vars.leftCols(F) = unc.diag_vars;
  out.diag_vars.middleCols(F, F) = v1;
  out.diag_vars.rightCols(F) = v2;
  return out;
}

FeatureMatrix EnergyVad(const FeatureMatrix &fm, double threshold_db) {
  if (fm.log_energy_dim < 0 || fm.log_energy_dim >= fm.Dim())
    throw InvalidArgument("VAD needs a log-energy column");
  // dB on an energy ratio -> natural-log units.
  const double threshold = threshold_db / 10.0 * std::log(10.0);
  auto energy = fm.frames.col(fm.log_energy_dim);
  const double max_energy = energy.maxCoeff();
  FeatureMatrix out = fm;
  for (Eigen::Index t = 0; t < fm.NumFrames(); ++t)
    out.vad_mask[t] = energy(t) > max_energy - threshold ? 1 : 0;
  return out;
}

CmvnResult Cmvn(const FeatureMatrix &fm) {
  constexpr double kCmvnVarFloor = 1e-8;
  const Eigen::Index n = fm.NumVoiced();
  if (n < 2)
    throw InsufficientDataError("CMVN needs at least 2 voiced frames in '" +
                                fm.utt_id + "'");
  const Eigen::Index F = fm.Dim();
  Vector sum = Vector::Zero(F), sumsq = Vector::Zero(F);
  for (Eigen::Index t = 0; t < fm.NumFrames(); ++t) {
    if (!fm.Voiced(t)) continue;
    sum += fm.frames.row(t).transpose();
  }
  Vector mean = sum / static_cast<double>(n);
  // Two-pass variance for accuracy on already-centered input.
  for (Eigen::Index t = 0; t < fm.NumFrames(); ++t) {
    if (!fm.Voiced(t)) continue;
    sumsq += (fm.frames.row(t).transpose() - mean).array().square().matrix();
  }
  Vector var = sumsq / static_cast<double>(n);
  Vector scale = var.array().max(kCmvnVarFloor).sqrt();

  CmvnResult res{fm, mean, scale};
  res.features.frames =
      (fm.frames.rowwise() - mean.transpose()).array().rowwise() /
      scale.transpose().array();
  return res;
}

UncertaintySequence ScaleUncertainty(const UncertaintySequence &unc,
                                     const Vector &scales) {
  if (scales.size() != unc.Dim())
    throw DimensionError("uncertainty/scale dimension mismatch");
  if ((scales.array() <= 0.0).any() || !scales.allFinite())
    throw InvalidArgument("uncertainty scales must be positive and finite");
  UncertaintySequence out = unc;
  out.diag_vars.array().rowwise() /= scales.array().square().transpose();
  return out;
}

}  // namespace ivup

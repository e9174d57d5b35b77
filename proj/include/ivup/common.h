// ivup/common.h

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

#ifndef IVUP_COMMON_H_
#define IVUP_COMMON_H_

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

#include <Eigen/Dense>

namespace ivup {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
// Frame-major storage: row t of a feature matrix is contiguous, which is what
// the per-frame kernels consume.
using RowMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Arguments violate a documented precondition (bad count, bad range...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Shapes of two related objects disagree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// NaN or infinity where only finite numbers are allowed.
class NonFiniteError : public Error {
 public:
  using Error::Error;
};

/// Magic, version or structural mismatch in a serialized object.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Input ended before the declared payload was read.
class TruncatedError : public FormatError {
 public:
  using FormatError::FormatError;
};

/// Not enough data to estimate the requested model.
class InsufficientDataError : public Error {
 public:
  using Error::Error;
};

enum class LogLevel { kQuiet = 0, kWarning = 1, kInfo = 2 };

void SetLogLevel(LogLevel level);
LogLevel GetLogLevel();
void LogWarning(std::string_view msg);
void LogInfo(std::string_view msg);

/// Variance floor applied to every trained or generated diagonal covariance.
inline constexpr double kVarianceFloor = 1e-4;

/// Throws NonFiniteError naming `what` if any entry is NaN/Inf.
template <typename Derived>
void CheckFinite(const Eigen::DenseBase<Derived> &m, std::string_view what) {
  if (!m.allFinite())
    throw NonFiniteError(std::string(what) + ": non-finite value");
}

}  // namespace ivup

#endif  // IVUP_COMMON_H_

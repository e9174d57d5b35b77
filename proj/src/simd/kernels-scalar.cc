// simd/kernels-scalar.cc

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

#include "simd/kernels-internal.h"

namespace ivup::kernels::scalar {

void DiagGaussLogLik(const double *y, const double *means,
                     const double *inv_vars, const double *log_norms,
                     std::size_t num_comp, std::size_t dim, double *out) {
  for (std::size_t c = 0; c < num_comp; ++c) {
    const double *m = means + c * dim;
    const double *iv = inv_vars + c * dim;
    double acc = 0.0;
    for (std::size_t f = 0; f < dim; ++f) {
      double d = y[f] - m[f];
      acc += d * d * iv[f];
    }
    out[c] = log_norms[c] - 0.5 * acc;
  }
}

void Axpy(double alpha, const double *x, double *y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void AxpyMul(double alpha, const double *x, const double *z, double *y,
             std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * (x[i] * z[i]);
}

double Dot(const double *x, const double *y, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

}  // namespace ivup::kernels::scalar

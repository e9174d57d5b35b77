// simd/kernels-avx2.cc

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

// Compiled with -mavx2 -mfma. Nothing in here may be reached unless the
// dispatcher has verified CPU support.

#include <immintrin.h>

#include "simd/kernels-internal.h"

namespace ivup::kernels::avx2 {

namespace {

inline double HorizontalSum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d sh = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
}

}  // namespace

void DiagGaussLogLik(const double *y, const double *means,
                     const double *inv_vars, const double *log_norms,
                     std::size_t num_comp, std::size_t dim, double *out) {
  const std::size_t vec_end = dim & ~std::size_t{3};
  for (std::size_t c = 0; c < num_comp; ++c) {
    const double *m = means + c * dim;
    const double *iv = inv_vars + c * dim;
    __m256d acc = _mm256_setzero_pd();
    std::size_t f = 0;
    for (; f < vec_end; f += 4) {
      __m256d d = _mm256_sub_pd(_mm256_loadu_pd(y + f), _mm256_loadu_pd(m + f));
      __m256d dw = _mm256_mul_pd(d, _mm256_loadu_pd(iv + f));
      acc = _mm256_fmadd_pd(dw, d, acc);
    }
    double tail = HorizontalSum(acc);
    for (; f < dim; ++f) {
      double d = y[f] - m[f];
      tail += d * iv[f] * d;
    }
    out[c] = log_norms[c] - 0.5 * tail;
  }
}

void Axpy(double alpha, const double *x, double *y, std::size_t n) {
  const __m256d a = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d r = _mm256_fmadd_pd(a, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i));
    _mm256_storeu_pd(y + i, r);
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void AxpyMul(double alpha, const double *x, const double *z, double *y,
             std::size_t n) {
  const __m256d a = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d xz = _mm256_mul_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(z + i));
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(a, xz, _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] += alpha * (x[i] * z[i]);
}

double Dot(const double *x, const double *y, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4),
                           _mm256_loadu_pd(y + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4)
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
  double sum = HorizontalSum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) sum += x[i] * y[i];
  return sum;
}

}  // namespace ivup::kernels::avx2

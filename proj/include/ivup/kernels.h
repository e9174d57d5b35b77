// ivup/kernels.h

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

#ifndef IVUP_KERNELS_H_
#define IVUP_KERNELS_H_

// Inner loops of posterior evaluation and statistics accumulation.
//
// Every kernel has a scalar reference implementation and, on x86-64, an
// AVX2/FMA variant. The variant is chosen once at startup from CPUID; the
// environment variable IVUP_SIMD=scalar|avx2 overrides the choice. All
// variants agree to within floating-point reassociation (tested).

#include <cstddef>
#include <span>

namespace ivup::kernels {

enum class Isa { kScalar, kAvx2 };

struct KernelTable {
  Isa isa;
  const char *name;

  // out[c] = log_norms[c] - 0.5 * sum_f (y[f] - means[c,f])^2 * inv_vars[c,f]
  // means and inv_vars are num_comp x dim, row-major.
  void (*diag_gauss_loglik)(const double *y, const double *means,
                            const double *inv_vars, const double *log_norms,
                            std::size_t num_comp, std::size_t dim,
                            double *out);

  // y += alpha * x
  void (*axpy)(double alpha, const double *x, double *y, std::size_t n);

  // y += alpha * (x .* z). With x == 1 this is bit-identical to axpy(alpha, z).
  void (*axpy_mul)(double alpha, const double *x, const double *z, double *y,
                   std::size_t n);

  double (*dot)(const double *x, const double *y, std::size_t n);
};

const KernelTable &ScalarKernels();

/// Returns nullptr when the AVX2 variant was not compiled in or the CPU lacks
/// AVX2/FMA.
const KernelTable *Avx2Kernels();

/// The table used by the library.
const KernelTable &Active();

/// Forces a variant; returns false (and changes nothing) if unavailable.
/// Intended for tests and benchmarking, not for use while other threads run
/// kernels.
bool SetActive(Isa isa);

const char *IsaName(Isa isa);

// Span wrappers over the active table.

inline void DiagGaussLogLik(std::span<const double> y,
                            std::span<const double> means,
                            std::span<const double> inv_vars,
                            std::span<const double> log_norms,
                            std::span<double> out) {
  Active().diag_gauss_loglik(y.data(), means.data(), inv_vars.data(),
                             log_norms.data(), log_norms.size(), y.size(),
                             out.data());
}

inline void Axpy(double alpha, std::span<const double> x, std::span<double> y) {
  Active().axpy(alpha, x.data(), y.data(), y.size());
}

inline void AxpyMul(double alpha, std::span<const double> x,
                    std::span<const double> z, std::span<double> y) {
  Active().axpy_mul(alpha, x.data(), z.data(), y.data(), y.size());
}

inline double Dot(std::span<const double> x, std::span<const double> y) {
  return Active().dot(x.data(), y.data(), x.size());
}

}  // namespace ivup::kernels

#endif  // IVUP_KERNELS_H_

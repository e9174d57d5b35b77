// simd/kernels-internal.h

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

#ifndef IVUP_SIMD_KERNELS_INTERNAL_H_
#define IVUP_SIMD_KERNELS_INTERNAL_H_

#include <cstddef>

namespace ivup::kernels {

namespace scalar {
void DiagGaussLogLik(const double *y, const double *means,
                     const double *inv_vars, const double *log_norms,
                     std::size_t num_comp, std::size_t dim, double *out);
void Axpy(double alpha, const double *x, double *y, std::size_t n);
void AxpyMul(double alpha, const double *x, const double *z, double *y,
             std::size_t n);
double Dot(const double *x, const double *y, std::size_t n);
}  // namespace scalar

// Only defined in the translation unit built with -mavx2 -mfma; never call
// these without checking CPU support first.
namespace avx2 {
void DiagGaussLogLik(const double *y, const double *means,
                     const double *inv_vars, const double *log_norms,
                     std::size_t num_comp, std::size_t dim, double *out);
void Axpy(double alpha, const double *x, double *y, std::size_t n);
void AxpyMul(double alpha, const double *x, const double *z, double *y,
             std::size_t n);
double Dot(const double *x, const double *y, std::size_t n);
}  // namespace avx2

}  // namespace ivup::kernels

#endif  // IVUP_SIMD_KERNELS_INTERNAL_H_

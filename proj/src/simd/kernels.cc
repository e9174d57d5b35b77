// simd/kernels.cc

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

#include <atomic>
#include <cstdlib>
#include <string_view>

#include "ivup/common.h"
#include "ivup/kernels.h"
#include "simd/kernels-internal.h"

namespace ivup::kernels {

namespace {

const KernelTable kScalarTable = {Isa::kScalar,           "scalar",
                                  &scalar::DiagGaussLogLik, &scalar::Axpy,
                                  &scalar::AxpyMul,         &scalar::Dot};

#if defined(IVUP_HAVE_AVX2)
const KernelTable kAvx2Table = {Isa::kAvx2,           "avx2",
                                &avx2::DiagGaussLogLik, &avx2::Axpy,
                                &avx2::AxpyMul,         &avx2::Dot};

bool CpuHasAvx2() {
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
}
#endif

const KernelTable *SelectInitial() {
  const KernelTable *best = Avx2Kernels();
  if (const char *env = std::getenv("IVUP_SIMD")) {
    std::string_view want(env);
    if (want == "scalar") return &kScalarTable;
    if (want == "avx2" && best == nullptr)
      LogWarning("IVUP_SIMD=avx2 requested but AVX2 is unavailable; "
                 "using scalar kernels");
  }
  return best != nullptr ? best : &kScalarTable;
}

std::atomic<const KernelTable *> &ActivePtr() {
  static std::atomic<const KernelTable *> active{SelectInitial()};
  return active;
}

}  // namespace

const KernelTable &ScalarKernels() { return kScalarTable; }

const KernelTable *Avx2Kernels() {
#if defined(IVUP_HAVE_AVX2)
  static const bool supported = CpuHasAvx2();
  return supported ? &kAvx2Table : nullptr;
#else
  return nullptr;
#endif
}

const KernelTable &Active() {
  return *ActivePtr().load(std::memory_order_relaxed);
}

bool SetActive(Isa isa) {
  const KernelTable *table =
      isa == Isa::kScalar ? &kScalarTable : Avx2Kernels();
  if (table == nullptr) return false;
  ActivePtr().store(table);
  return true;
}

const char *IsaName(Isa isa) {
  return isa == Isa::kScalar ? "scalar" : "avx2";
}

}  // namespace ivup::kernels

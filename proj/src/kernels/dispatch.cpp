// Copyright (c) the hcae authors
// SPDX-License-Identifier: Apache-2.0
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "hcae/kernels/kernels.hpp"

namespace hcae::kernels {

namespace {

bool cpu_has_avx2_fma() {
#if defined(__x86_64__) || defined(__i386__)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Isa initial_isa() {
  Isa best = best_supported();
  if (const char* env = std::getenv("HCAE_KERNEL_ISA")) {
    const std::string v(env);
    if (v == "scalar") return Isa::scalar;
    if (v == "avx2" && best == Isa::avx2) return Isa::avx2;
    // Unknown or unsupported request: fall through to auto-detection.
  }
  return best;
}

Isa& active_ref() {
  static Isa isa = initial_isa();
  return isa;
}

}  // namespace

const char* isa_name(Isa isa) { return isa == Isa::avx2 ? "avx2" : "scalar"; }

Isa best_supported() {
  return (detail::avx2_tu_built() && cpu_has_avx2_fma()) ? Isa::avx2 : Isa::scalar;
}

Isa active() { return active_ref(); }

void set_active(Isa isa) {
  if (isa == Isa::avx2 && best_supported() != Isa::avx2)
    throw std::invalid_argument("avx2 kernels not supported on this CPU/build");
  active_ref() = isa;
}

const Backend<float>& backend_f() {
  return active() == Isa::avx2 ? detail::avx2_backend_f : detail::scalar_backend_f;
}

const Backend<double>& backend_d() {
  return active() == Isa::avx2 ? detail::avx2_backend_d : detail::scalar_backend_d;
}

}  // namespace hcae::kernels

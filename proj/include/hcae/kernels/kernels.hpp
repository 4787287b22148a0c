// Copyright (c) the hcae authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>

// Data-parallel inner loops of the training/inference engine. Every entry
// point has a scalar reference implementation and, on x86-64, an AVX2+FMA
// variant selected at runtime. The two variants may round differently
// (FMA, 8-lane reduction trees) but are equivalence-tested against each
// other; within one process the selected variant is fixed, so results are
// reproducible.
//
// Conventions: all matrices are dense row-major; output buffers never alias
// inputs; `acc` accumulates into the output instead of overwriting it.

namespace hcae::kernels {

enum class Isa { scalar = 0, avx2 = 1 };

const char* isa_name(Isa isa);

// Best ISA the running CPU supports.
Isa best_supported();

// Active ISA. Defaults to best_supported(), overridable with the
// HCAE_KERNEL_ISA environment variable ("scalar" | "avx2") or set_active().
Isa active();

// Throws std::invalid_argument if the CPU does not support `isa`.
void set_active(Isa isa);

template <typename T>
struct Backend {
  // C(m,n) = A(m,k) * B(k,n)
  void (*gemm_nn)(const T* a, const T* b, T* c, int64_t m, int64_t k, int64_t n, bool acc);
  // C(m,n) = A^T * B with A stored (k,m), B stored (k,n)
  void (*gemm_tn)(const T* a, const T* b, T* c, int64_t m, int64_t k, int64_t n, bool acc);
  // C(m,n) = A * B^T with A stored (m,k), B stored (n,k)
  void (*gemm_nt)(const T* a, const T* b, T* c, int64_t m, int64_t k, int64_t n, bool acc);

  void (*axpy)(T alpha, const T* x, T* y, int64_t n);  // y += alpha * x
  T (*dot)(const T* x, const T* y, int64_t n);

  void (*add_rowvec)(const T* v, T* y, int64_t rows, int64_t cols);  // y[r,:] += v

  void (*relu_fwd)(const T* x, T* y, int64_t n);
  // dx = dy where y > 0, else 0
  void (*relu_bwd)(const T* y, const T* dy, T* dx, int64_t n);

  void (*colsum)(const T* x, T* out, int64_t rows, int64_t cols, bool acc);
  // out[c] = sum_r (x[r,c] - mean[c])^2
  void (*colsumsq_centered)(const T* x, const T* mean, T* out, int64_t rows, int64_t cols);
  // out[c] (+)= sum_r a[r,c] * b[r,c]
  void (*col_dot)(const T* a, const T* b, T* out, int64_t rows, int64_t cols, bool acc);

  // y[r,c] = (x[r,c] - shift[c]) * scale[c] + bias[c]
  void (*affine_channels)(const T* x, const T* shift, const T* scale, const T* bias, T* y,
                          int64_t rows, int64_t cols);
  // y[r,c] = x[r,c] * scale[c]
  void (*scale_channels)(const T* x, const T* scale, T* y, int64_t rows, int64_t cols);

  // In-place Adam update for one parameter array. bc1/bc2 are the
  // bias-correction factors 1 - beta^t of the current step.
  void (*adam_step)(T* w, const T* g, T* m, T* v, int64_t n, T lr, T beta1, T beta2, T eps,
                    T bc1, T bc2);
};

const Backend<float>& backend_f();
const Backend<double>& backend_d();

template <typename T>
inline const Backend<T>& backend() {
  if constexpr (sizeof(T) == sizeof(float))
    return backend_f();
  else
    return backend_d();
}

template <typename T>
inline void gemm_nn(const T* a, const T* b, T* c, int64_t m, int64_t k, int64_t n,
                    bool acc = false) {
  backend<T>().gemm_nn(a, b, c, m, k, n, acc);
}
template <typename T>
inline void gemm_tn(const T* a, const T* b, T* c, int64_t m, int64_t k, int64_t n,
                    bool acc = false) {
  backend<T>().gemm_tn(a, b, c, m, k, n, acc);
}
template <typename T>
inline void gemm_nt(const T* a, const T* b, T* c, int64_t m, int64_t k, int64_t n,
                    bool acc = false) {
  backend<T>().gemm_nt(a, b, c, m, k, n, acc);
}
template <typename T>
inline void axpy(T alpha, const T* x, T* y, int64_t n) {
  backend<T>().axpy(alpha, x, y, n);
}
template <typename T>
inline T dot(const T* x, const T* y, int64_t n) {
  return backend<T>().dot(x, y, n);
}
template <typename T>
inline void add_rowvec(const T* v, T* y, int64_t rows, int64_t cols) {
  backend<T>().add_rowvec(v, y, rows, cols);
}
template <typename T>
inline void relu_fwd(const T* x, T* y, int64_t n) {
  backend<T>().relu_fwd(x, y, n);
}
template <typename T>
inline void relu_bwd(const T* y, const T* dy, T* dx, int64_t n) {
  backend<T>().relu_bwd(y, dy, dx, n);
}
template <typename T>
inline void colsum(const T* x, T* out, int64_t rows, int64_t cols, bool acc = false) {
  backend<T>().colsum(x, out, rows, cols, acc);
}
template <typename T>
inline void colsumsq_centered(const T* x, const T* mean, T* out, int64_t rows, int64_t cols) {
  backend<T>().colsumsq_centered(x, mean, out, rows, cols);
}
template <typename T>
inline void col_dot(const T* a, const T* b, T* out, int64_t rows, int64_t cols, bool acc = false) {
  backend<T>().col_dot(a, b, out, rows, cols, acc);
}
template <typename T>
inline void affine_channels(const T* x, const T* shift, const T* scale, const T* bias, T* y,
                            int64_t rows, int64_t cols) {
  backend<T>().affine_channels(x, shift, scale, bias, y, rows, cols);
}
template <typename T>
inline void scale_channels(const T* x, const T* scale, T* y, int64_t rows, int64_t cols) {
  backend<T>().scale_channels(x, scale, y, rows, cols);
}
template <typename T>
inline void adam_step(T* w, const T* g, T* m, T* v, int64_t n, T lr, T beta1, T beta2, T eps,
                      T bc1, T bc2) {
  backend<T>().adam_step(w, g, m, v, n, lr, beta1, beta2, eps, bc1, bc2);
}

namespace detail {
extern const Backend<float> scalar_backend_f;
extern const Backend<double> scalar_backend_d;
// Defined only when the AVX2 translation unit is built (x86-64).
extern const Backend<float> avx2_backend_f;
extern const Backend<double> avx2_backend_d;
bool avx2_tu_built();
}  // namespace detail

}  // namespace hcae::kernels

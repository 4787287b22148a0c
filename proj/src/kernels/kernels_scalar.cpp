// Copyright (c) the hcae authors
// SPDX-License-Identifier: Apache-2.0
//
// Reference implementations. Plain loops, one fixed accumulation order per
// output element; the parallel row partition never splits an accumulation,
// so results do not depend on the thread count.
#include <algorithm>
#include <cmath>
#include <cstring>

#include "hcae/kernels/kernels.hpp"

namespace hcae::kernels {
namespace {

constexpr int64_t kParallelFlops = 1 << 16;
constexpr int64_t kParallelElems = 1 << 15;

template <typename T>
void gemm_nn_impl(const T* a, const T* b, T* c, int64_t m, int64_t k, int64_t n, bool acc) {
  const bool par = m > 1 && m * k * n >= kParallelFlops;
#pragma omp parallel for schedule(static) if (par)
  for (int64_t i = 0; i < m; ++i) {
    T* crow = c + i * n;
    if (!acc) std::memset(crow, 0, sizeof(T) * static_cast<size_t>(n));
    const T* arow = a + i * k;
    for (int64_t kk = 0; kk < k; ++kk) {
      const T aik = arow[kk];
      const T* brow = b + kk * n;
      for (int64_t j = 0; j < n; ++j) crow[j] += aik * brow[j];
    }
  }
}

// Output rows are processed in tiles so the B operand streams through cache
// once per tile instead of once per row (the A^T access is strided).
template <typename T>
void gemm_tn_impl(const T* a, const T* b, T* c, int64_t m, int64_t k, int64_t n, bool acc) {
  constexpr int64_t kTile = 8;
  const bool par = m > kTile && m * k * n >= kParallelFlops;
#pragma omp parallel for schedule(static) if (par)
  for (int64_t i0 = 0; i0 < m; i0 += kTile) {
    const int64_t ilim = std::min(kTile, m - i0);
    if (!acc)
      for (int64_t ii = 0; ii < ilim; ++ii)
        std::memset(c + (i0 + ii) * n, 0, sizeof(T) * static_cast<size_t>(n));
    for (int64_t r = 0; r < k; ++r) {
      const T* acol = a + r * m + i0;
      const T* brow = b + r * n;
      for (int64_t ii = 0; ii < ilim; ++ii) {
        const T ari = acol[ii];
        T* crow = c + (i0 + ii) * n;
        for (int64_t j = 0; j < n; ++j) crow[j] += ari * brow[j];
      }
    }
  }
}

template <typename T>
void gemm_nt_impl(const T* a, const T* b, T* c, int64_t m, int64_t k, int64_t n, bool acc) {
  const bool par = m > 1 && m * k * n >= kParallelFlops;
#pragma omp parallel for schedule(static) if (par)
  for (int64_t i = 0; i < m; ++i) {
    const T* arow = a + i * k;
    T* crow = c + i * n;
    for (int64_t j = 0; j < n; ++j) {
      const T* brow = b + j * k;
      T s = 0;
      for (int64_t t = 0; t < k; ++t) s += arow[t] * brow[t];
      crow[j] = acc ? crow[j] + s : s;
    }
  }
}

template <typename T>
void axpy_impl(T alpha, const T* x, T* y, int64_t n) {
  for (int64_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

template <typename T>
T dot_impl(const T* x, const T* y, int64_t n) {
  T s = 0;
  for (int64_t i = 0; i < n; ++i) s += x[i] * y[i];
  return s;
}

template <typename T>
void add_rowvec_impl(const T* v, T* y, int64_t rows, int64_t cols) {
  const bool par = rows > 1 && rows * cols >= kParallelElems;
#pragma omp parallel for schedule(static) if (par)
  for (int64_t r = 0; r < rows; ++r) {
    T* yrow = y + r * cols;
    for (int64_t c = 0; c < cols; ++c) yrow[c] += v[c];
  }
}

template <typename T>
void relu_fwd_impl(const T* x, T* y, int64_t n) {
  const bool par = n >= kParallelElems;
#pragma omp parallel for schedule(static) if (par)
  for (int64_t i = 0; i < n; ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
}

template <typename T>
void relu_bwd_impl(const T* y, const T* dy, T* dx, int64_t n) {
  const bool par = n >= kParallelElems;
#pragma omp parallel for schedule(static) if (par)
  for (int64_t i = 0; i < n; ++i) dx[i] = y[i] > T(0) ? dy[i] : T(0);
}

template <typename T>
void colsum_impl(const T* x, T* out, int64_t rows, int64_t cols, bool acc) {
  if (!acc) std::memset(out, 0, sizeof(T) * static_cast<size_t>(cols));
  for (int64_t r = 0; r < rows; ++r) {
    const T* xrow = x + r * cols;
    for (int64_t c = 0; c < cols; ++c) out[c] += xrow[c];
  }
}

template <typename T>
void colsumsq_centered_impl(const T* x, const T* mean, T* out, int64_t rows, int64_t cols) {
  std::memset(out, 0, sizeof(T) * static_cast<size_t>(cols));
  for (int64_t r = 0; r < rows; ++r) {
    const T* xrow = x + r * cols;
    for (int64_t c = 0; c < cols; ++c) {
      const T d = xrow[c] - mean[c];
      out[c] += d * d;
    }
  }
}

template <typename T>
void col_dot_impl(const T* a, const T* b, T* out, int64_t rows, int64_t cols, bool acc) {
  if (!acc) std::memset(out, 0, sizeof(T) * static_cast<size_t>(cols));
  for (int64_t r = 0; r < rows; ++r) {
    const T* arow = a + r * cols;
    const T* brow = b + r * cols;
    for (int64_t c = 0; c < cols; ++c) out[c] += arow[c] * brow[c];
  }
}

template <typename T>
void affine_channels_impl(const T* x, const T* shift, const T* scale, const T* bias, T* y,
                          int64_t rows, int64_t cols) {
  const bool par = rows > 1 && rows * cols >= kParallelElems;
#pragma omp parallel for schedule(static) if (par)
  for (int64_t r = 0; r < rows; ++r) {
    const T* xrow = x + r * cols;
    T* yrow = y + r * cols;
    for (int64_t c = 0; c < cols; ++c) yrow[c] = (xrow[c] - shift[c]) * scale[c] + bias[c];
  }
}

template <typename T>
void scale_channels_impl(const T* x, const T* scale, T* y, int64_t rows, int64_t cols) {
  const bool par = rows > 1 && rows * cols >= kParallelElems;
#pragma omp parallel for schedule(static) if (par)
  for (int64_t r = 0; r < rows; ++r) {
    const T* xrow = x + r * cols;
    T* yrow = y + r * cols;
    for (int64_t c = 0; c < cols; ++c) yrow[c] = xrow[c] * scale[c];
  }
}

template <typename T>
void adam_step_impl(T* w, const T* g, T* m, T* v, int64_t n, T lr, T beta1, T beta2, T eps,
                    T bc1, T bc2) {
  const bool par = n >= kParallelElems;
#pragma omp parallel for schedule(static) if (par)
  for (int64_t i = 0; i < n; ++i) {
    m[i] = beta1 * m[i] + (T(1) - beta1) * g[i];
    v[i] = beta2 * v[i] + (T(1) - beta2) * g[i] * g[i];
    const T mhat = m[i] / bc1;
    const T vhat = v[i] / bc2;
    w[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

template <typename T>
constexpr Backend<T> make_scalar_backend() {
  return Backend<T>{
      &gemm_nn_impl<T>,  &gemm_tn_impl<T>,         &gemm_nt_impl<T>,
      &axpy_impl<T>,     &dot_impl<T>,             &add_rowvec_impl<T>,
      &relu_fwd_impl<T>, &relu_bwd_impl<T>,        &colsum_impl<T>,
      &colsumsq_centered_impl<T>,                  &col_dot_impl<T>,
      &affine_channels_impl<T>,                    &scale_channels_impl<T>,
      &adam_step_impl<T>};
}

}  // namespace

namespace detail {
const Backend<float> scalar_backend_f = make_scalar_backend<float>();
const Backend<double> scalar_backend_d = make_scalar_backend<double>();
}  // namespace detail

}  // namespace hcae::kernels

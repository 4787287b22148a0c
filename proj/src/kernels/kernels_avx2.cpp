// Copyright (c) the hcae authors
// SPDX-License-Identifier: Apache-2.0
//
// AVX2+FMA variants. This translation unit is compiled with -mavx2 -mfma on
// x86-64; the dispatcher only routes here after a runtime CPUID check. Each
// output element keeps one fixed accumulation order (vector lanes reduced in
// a fixed tree), so a given ISA selection is bit-reproducible run to run.
#include "hcae/kernels/kernels.hpp"

#if defined(__AVX2__) && defined(__FMA__)

#include <immintrin.h>

#include <algorithm>
#include <cmath>
#include <cstring>

namespace hcae::kernels {
namespace {

constexpr int64_t kParallelFlops = 1 << 16;
constexpr int64_t kParallelElems = 1 << 15;

inline float hsum(__m256 v) {
  __m128 lo = _mm256_castps256_ps128(v);
  __m128 hi = _mm256_extractf128_ps(v, 1);
  lo = _mm_add_ps(lo, hi);
  __m128 sh = _mm_movehl_ps(lo, lo);
  lo = _mm_add_ps(lo, sh);
  sh = _mm_shuffle_ps(lo, lo, 0x1);
  lo = _mm_add_ss(lo, sh);
  return _mm_cvtss_f32(lo);
}

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d sh = _mm_unpackhi_pd(lo, lo);
  lo = _mm_add_sd(lo, sh);
  return _mm_cvtsd_f64(lo);
}

// Minimal vector abstraction so float (8-lane) and double (4-lane) kernels
// share one template body.
template <typename T>
struct V;

template <>
struct V<float> {
  using reg = __m256;
  static constexpr int64_t lanes = 8;
  static reg load(const float* p) { return _mm256_loadu_ps(p); }
  static void store(float* p, reg v) { _mm256_storeu_ps(p, v); }
  static reg set1(float v) { return _mm256_set1_ps(v); }
  static reg zero() { return _mm256_setzero_ps(); }
  static reg fmadd(reg a, reg b, reg c) { return _mm256_fmadd_ps(a, b, c); }
  static reg add(reg a, reg b) { return _mm256_add_ps(a, b); }
  static reg sub(reg a, reg b) { return _mm256_sub_ps(a, b); }
  static reg mul(reg a, reg b) { return _mm256_mul_ps(a, b); }
  static reg div(reg a, reg b) { return _mm256_div_ps(a, b); }
  static reg sqrt(reg a) { return _mm256_sqrt_ps(a); }
  static reg max(reg a, reg b) { return _mm256_max_ps(a, b); }
  static reg gt_mask(reg a, reg b) { return _mm256_cmp_ps(a, b, _CMP_GT_OQ); }
  static reg and_(reg a, reg b) { return _mm256_and_ps(a, b); }
  static float reduce(reg v) { return hsum(v); }
};

template <>
struct V<double> {
  using reg = __m256d;
  static constexpr int64_t lanes = 4;
  static reg load(const double* p) { return _mm256_loadu_pd(p); }
  static void store(double* p, reg v) { _mm256_storeu_pd(p, v); }
  static reg set1(double v) { return _mm256_set1_pd(v); }
  static reg zero() { return _mm256_setzero_pd(); }
  static reg fmadd(reg a, reg b, reg c) { return _mm256_fmadd_pd(a, b, c); }
  static reg add(reg a, reg b) { return _mm256_add_pd(a, b); }
  static reg sub(reg a, reg b) { return _mm256_sub_pd(a, b); }
  static reg mul(reg a, reg b) { return _mm256_mul_pd(a, b); }
  static reg div(reg a, reg b) { return _mm256_div_pd(a, b); }
  static reg sqrt(reg a) { return _mm256_sqrt_pd(a); }
  static reg max(reg a, reg b) { return _mm256_max_pd(a, b); }
  static reg gt_mask(reg a, reg b) { return _mm256_cmp_pd(a, b, _CMP_GT_OQ); }
  static reg and_(reg a, reg b) { return _mm256_and_pd(a, b); }
  static double reduce(reg v) { return hsum(v); }
};

// Shared body of gemm_nn / gemm_tn: C[i,:] accumulates scale-rows of B. The
// only difference is how the broadcast scalar is fetched, so it comes in as
// a lambda.
template <typename T, typename FetchA>
inline void gemm_rowacc(FetchA fetch_a, const T* b, T* c, int64_t m, int64_t k, int64_t n,
                        bool acc) {
  using W = V<T>;
  const bool par = m > 1 && m * k * n >= kParallelFlops;
#pragma omp parallel for schedule(static) if (par)
  for (int64_t i = 0; i < m; ++i) {
    T* crow = c + i * n;
    if (!acc) std::memset(crow, 0, sizeof(T) * static_cast<size_t>(n));
    int64_t kk = 0;
    for (; kk + 4 <= k; kk += 4) {
      const T s0 = fetch_a(i, kk), s1 = fetch_a(i, kk + 1);
      const T s2 = fetch_a(i, kk + 2), s3 = fetch_a(i, kk + 3);
      const typename W::reg a0 = W::set1(s0), a1 = W::set1(s1);
      const typename W::reg a2 = W::set1(s2), a3 = W::set1(s3);
      const T* b0 = b + kk * n;
      const T* b1 = b0 + n;
      const T* b2 = b1 + n;
      const T* b3 = b2 + n;
      int64_t j = 0;
      for (; j + W::lanes <= n; j += W::lanes) {
        typename W::reg cv = W::load(crow + j);
        cv = W::fmadd(a0, W::load(b0 + j), cv);
        cv = W::fmadd(a1, W::load(b1 + j), cv);
        cv = W::fmadd(a2, W::load(b2 + j), cv);
        cv = W::fmadd(a3, W::load(b3 + j), cv);
        W::store(crow + j, cv);
      }
      for (; j < n; ++j) crow[j] += s0 * b0[j] + s1 * b1[j] + s2 * b2[j] + s3 * b3[j];
    }
    for (; kk < k; ++kk) {
      const T s = fetch_a(i, kk);
      const typename W::reg av = W::set1(s);
      const T* brow = b + kk * n;
      int64_t j = 0;
      for (; j + W::lanes <= n; j += W::lanes)
        W::store(crow + j, W::fmadd(av, W::load(brow + j), W::load(crow + j)));
      for (; j < n; ++j) crow[j] += s * brow[j];
    }
  }
}

template <typename T>
void gemm_nn_impl(const T* a, const T* b, T* c, int64_t m, int64_t k, int64_t n, bool acc) {
  gemm_rowacc<T>([a, k](int64_t i, int64_t kk) { return a[i * k + kk]; }, b, c, m, k, n, acc);
}

// Tiled over output rows: B streams through cache once per tile of 8 rows
// rather than once per row, and the strided A^T reads within a tile land on
// one cache line.
template <typename T>
void gemm_tn_impl(const T* a, const T* b, T* c, int64_t m, int64_t k, int64_t n, bool acc) {
  using W = V<T>;
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
        const T s = acol[ii];
        const typename W::reg sv = W::set1(s);
        T* crow = c + (i0 + ii) * n;
        int64_t j = 0;
        for (; j + W::lanes <= n; j += W::lanes)
          W::store(crow + j, W::fmadd(sv, W::load(brow + j), W::load(crow + j)));
        for (; j < n; ++j) crow[j] += s * brow[j];
      }
    }
  }
}

template <typename T>
inline T dot_vec(const T* x, const T* y, int64_t n) {
  using W = V<T>;
  typename W::reg acc = W::zero();
  int64_t i = 0;
  for (; i + W::lanes <= n; i += W::lanes) acc = W::fmadd(W::load(x + i), W::load(y + i), acc);
  T s = W::reduce(acc);
  for (; i < n; ++i) s += x[i] * y[i];
  return s;
}

template <typename T>
void gemm_nt_impl(const T* a, const T* b, T* c, int64_t m, int64_t k, int64_t n, bool acc) {
  const bool par = m > 1 && m * k * n >= kParallelFlops;
#pragma omp parallel for schedule(static) if (par)
  for (int64_t i = 0; i < m; ++i) {
    const T* arow = a + i * k;
    T* crow = c + i * n;
    for (int64_t j = 0; j < n; ++j) {
      const T s = dot_vec(arow, b + j * k, k);
      crow[j] = acc ? crow[j] + s : s;
    }
  }
}

template <typename T>
void axpy_impl(T alpha, const T* x, T* y, int64_t n) {
  using W = V<T>;
  const typename W::reg av = W::set1(alpha);
  int64_t i = 0;
  for (; i + W::lanes <= n; i += W::lanes)
    W::store(y + i, W::fmadd(av, W::load(x + i), W::load(y + i)));
  for (; i < n; ++i) y[i] += alpha * x[i];
}

template <typename T>
T dot_impl(const T* x, const T* y, int64_t n) {
  return dot_vec(x, y, n);
}

template <typename T>
void add_rowvec_impl(const T* v, T* y, int64_t rows, int64_t cols) {
  using W = V<T>;
  const bool par = rows > 1 && rows * cols >= kParallelElems;
#pragma omp parallel for schedule(static) if (par)
  for (int64_t r = 0; r < rows; ++r) {
    T* yrow = y + r * cols;
    int64_t c = 0;
    for (; c + W::lanes <= cols; c += W::lanes)
      W::store(yrow + c, W::add(W::load(yrow + c), W::load(v + c)));
    for (; c < cols; ++c) yrow[c] += v[c];
  }
}

template <typename T>
void relu_fwd_impl(const T* x, T* y, int64_t n) {
  using W = V<T>;
  const typename W::reg z = W::zero();
  const bool par = n >= kParallelElems;
#pragma omp parallel for schedule(static) if (par)
  for (int64_t i = 0; i < n; i += W::lanes) {
    if (i + W::lanes <= n) {
      W::store(y + i, W::max(W::load(x + i), z));
    } else {
      for (int64_t t = i; t < n; ++t) y[t] = x[t] > T(0) ? x[t] : T(0);
    }
  }
}

template <typename T>
void relu_bwd_impl(const T* y, const T* dy, T* dx, int64_t n) {
  using W = V<T>;
  const typename W::reg z = W::zero();
  const bool par = n >= kParallelElems;
#pragma omp parallel for schedule(static) if (par)
  for (int64_t i = 0; i < n; i += W::lanes) {
    if (i + W::lanes <= n) {
      const typename W::reg mask = W::gt_mask(W::load(y + i), z);
      W::store(dx + i, W::and_(mask, W::load(dy + i)));
    } else {
      for (int64_t t = i; t < n; ++t) dx[t] = y[t] > T(0) ? dy[t] : T(0);
    }
  }
}

template <typename T>
void colsum_impl(const T* x, T* out, int64_t rows, int64_t cols, bool acc) {
  using W = V<T>;
  if (!acc) std::memset(out, 0, sizeof(T) * static_cast<size_t>(cols));
  for (int64_t r = 0; r < rows; ++r) {
    const T* xrow = x + r * cols;
    int64_t c = 0;
    for (; c + W::lanes <= cols; c += W::lanes)
      W::store(out + c, W::add(W::load(out + c), W::load(xrow + c)));
    for (; c < cols; ++c) out[c] += xrow[c];
  }
}

template <typename T>
void colsumsq_centered_impl(const T* x, const T* mean, T* out, int64_t rows, int64_t cols) {
  using W = V<T>;
  std::memset(out, 0, sizeof(T) * static_cast<size_t>(cols));
  for (int64_t r = 0; r < rows; ++r) {
    const T* xrow = x + r * cols;
    int64_t c = 0;
    for (; c + W::lanes <= cols; c += W::lanes) {
      const typename W::reg d = W::sub(W::load(xrow + c), W::load(mean + c));
      W::store(out + c, W::fmadd(d, d, W::load(out + c)));
    }
    for (; c < cols; ++c) {
      const T d = xrow[c] - mean[c];
      out[c] += d * d;
    }
  }
}

template <typename T>
void col_dot_impl(const T* a, const T* b, T* out, int64_t rows, int64_t cols, bool acc) {
  using W = V<T>;
  if (!acc) std::memset(out, 0, sizeof(T) * static_cast<size_t>(cols));
  for (int64_t r = 0; r < rows; ++r) {
    const T* arow = a + r * cols;
    const T* brow = b + r * cols;
    int64_t c = 0;
    for (; c + W::lanes <= cols; c += W::lanes)
      W::store(out + c, W::fmadd(W::load(arow + c), W::load(brow + c), W::load(out + c)));
    for (; c < cols; ++c) out[c] += arow[c] * brow[c];
  }
}

template <typename T>
void affine_channels_impl(const T* x, const T* shift, const T* scale, const T* bias, T* y,
                          int64_t rows, int64_t cols) {
  using W = V<T>;
  const bool par = rows > 1 && rows * cols >= kParallelElems;
#pragma omp parallel for schedule(static) if (par)
  for (int64_t r = 0; r < rows; ++r) {
    const T* xrow = x + r * cols;
    T* yrow = y + r * cols;
    int64_t c = 0;
    for (; c + W::lanes <= cols; c += W::lanes) {
      const typename W::reg d = W::sub(W::load(xrow + c), W::load(shift + c));
      W::store(yrow + c, W::fmadd(d, W::load(scale + c), W::load(bias + c)));
    }
    for (; c < cols; ++c) yrow[c] = (xrow[c] - shift[c]) * scale[c] + bias[c];
  }
}

template <typename T>
void scale_channels_impl(const T* x, const T* scale, T* y, int64_t rows, int64_t cols) {
  using W = V<T>;
  const bool par = rows > 1 && rows * cols >= kParallelElems;
#pragma omp parallel for schedule(static) if (par)
  for (int64_t r = 0; r < rows; ++r) {
    const T* xrow = x + r * cols;
    T* yrow = y + r * cols;
    int64_t c = 0;
    for (; c + W::lanes <= cols; c += W::lanes)
      W::store(yrow + c, W::mul(W::load(xrow + c), W::load(scale + c)));
    for (; c < cols; ++c) yrow[c] = xrow[c] * scale[c];
  }
}

template <typename T>
void adam_step_impl(T* w, const T* g, T* m, T* v, int64_t n, T lr, T beta1, T beta2, T eps,
                    T bc1, T bc2) {
  using W = V<T>;
  const typename W::reg b1 = W::set1(beta1), b1c = W::set1(T(1) - beta1);
  const typename W::reg b2 = W::set1(beta2), b2c = W::set1(T(1) - beta2);
  const typename W::reg lrv = W::set1(lr), epsv = W::set1(eps);
  const typename W::reg ibc1 = W::set1(T(1) / bc1), ibc2 = W::set1(T(1) / bc2);
  int64_t i = 0;
  for (; i + W::lanes <= n; i += W::lanes) {
    const typename W::reg gv = W::load(g + i);
    typename W::reg mv = W::fmadd(b1, W::load(m + i), W::mul(b1c, gv));
    typename W::reg vv = W::fmadd(b2, W::load(v + i), W::mul(b2c, W::mul(gv, gv)));
    W::store(m + i, mv);
    W::store(v + i, vv);
    const typename W::reg mhat = W::mul(mv, ibc1);
    const typename W::reg vhat = W::mul(vv, ibc2);
    const typename W::reg upd = W::div(W::mul(lrv, mhat), W::add(W::sqrt(vhat), epsv));
    W::store(w + i, W::sub(W::load(w + i), upd));
  }
  for (; i < n; ++i) {
    m[i] = beta1 * m[i] + (T(1) - beta1) * g[i];
    v[i] = beta2 * v[i] + (T(1) - beta2) * g[i] * g[i];
    w[i] -= lr * (m[i] * (T(1) / bc1)) / (std::sqrt(v[i] * (T(1) / bc2)) + eps);
  }
}

template <typename T>
constexpr Backend<T> make_avx2_backend() {
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
const Backend<float> avx2_backend_f = make_avx2_backend<float>();
const Backend<double> avx2_backend_d = make_avx2_backend<double>();
bool avx2_tu_built() { return true; }
}  // namespace detail

}  // namespace hcae::kernels

#else  // !(__AVX2__ && __FMA__)

namespace hcae::kernels::detail {
// AVX2 TU compiled without AVX2 support (non-x86 target or the option is
// off): alias the scalar tables so the symbols exist; the dispatcher will
// never select them.
const Backend<float> avx2_backend_f = scalar_backend_f;
const Backend<double> avx2_backend_d = scalar_backend_d;
bool avx2_tu_built() { return false; }
}  // namespace hcae::kernels::detail

#endif

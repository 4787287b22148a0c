// Copyright (c) the hcae authors
// SPDX-License-Identifier: Apache-2.0
#include "hcae/nn/layers.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

#include "hcae/hash.hpp"
#include "hcae/kernels/kernels.hpp"

namespace hcae::nn {

namespace K = hcae::kernels;

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

template <typename T>
void check_nhwc(const Tensor<T>& x, const std::string& who) {
  if (x.rank() != 4)
    throw std::invalid_argument(who + ": expected rank-4 NHWC input, got " + x.shape_str());
}

// Fan-in scaled uniform init: U(-sqrt(6/fan_in), +sqrt(6/fan_in)).
template <typename T>
void init_fan_in_uniform(Tensor<T>& w, int64_t fan_in, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
  for (auto& v : w.data) v = static_cast<T>(rng.uniform(-limit, limit));
}

}  // namespace

// ---------------------------------------------------------------- Conv2D

template <typename T>
Conv2D<T>::Conv2D(std::string name, int in_ch, int out_ch, int ksize, Rng& init_rng)
    : Layer<T>(std::move(name)), in_ch_(in_ch), out_ch_(out_ch), ksize_(ksize) {
  require(in_ch > 0 && out_ch > 0, "Conv2D: channel counts must be positive");
  require(ksize > 0 && ksize % 2 == 1, "Conv2D: kernel size must be odd");
  weight_.id = this->name() + ".w";
  weight_.value = Tensor<T>({ksize * ksize * in_ch, out_ch});
  weight_.grad = Tensor<T>({ksize * ksize * in_ch, out_ch});
  init_fan_in_uniform(weight_.value, int64_t(ksize) * ksize * in_ch, init_rng);
  bias_.id = this->name() + ".b";
  bias_.value = Tensor<T>({out_ch});
  bias_.grad = Tensor<T>({out_ch});
}

template <typename T>
void Conv2D<T>::im2col(const Tensor<T>& x, Tensor<T>& col) const {
  const int n = x.dim(0), h = x.dim(1), w = x.dim(2), c = x.dim(3);
  const int pad = ksize_ / 2;
  const int64_t patch_cols = int64_t(ksize_) * ksize_ * c;
#pragma omp parallel for schedule(static) if (n > 1)
  for (int s = 0; s < n; ++s) {
    const T* xs = x.ptr() + int64_t(s) * h * w * c;
    T* crow = col.ptr() + int64_t(s) * h * w * patch_cols;
    for (int yy = 0; yy < h; ++yy) {
      for (int xx = 0; xx < w; ++xx) {
        for (int ky = 0; ky < ksize_; ++ky) {
          const int sy = yy + ky - pad;
          T* dst = crow + int64_t(ky) * ksize_ * c;
          if (sy < 0 || sy >= h) {
            std::memset(dst, 0, sizeof(T) * static_cast<size_t>(ksize_ * c));
            continue;
          }
          for (int kx = 0; kx < ksize_; ++kx) {
            const int sx = xx + kx - pad;
            if (sx < 0 || sx >= w)
              std::memset(dst + int64_t(kx) * c, 0, sizeof(T) * static_cast<size_t>(c));
            else
              std::memcpy(dst + int64_t(kx) * c, xs + (int64_t(sy) * w + sx) * c,
                          sizeof(T) * static_cast<size_t>(c));
          }
        }
        crow += patch_cols;
      }
    }
  }
}

template <typename T>
Tensor<T> Conv2D<T>::forward(const Tensor<T>& x, Phase, bool) {
  check_nhwc(x, this->name());
  require(x.dim(3) == in_ch_, this->name() + ": channel mismatch");
  const int n = x.dim(0), h = x.dim(1), w = x.dim(2);
  const int64_t rows = int64_t(n) * h * w;
  const int64_t patch_cols = int64_t(ksize_) * ksize_ * in_ch_;

  Tensor<T> col({int(rows), int(patch_cols)});
  im2col(x, col);
  Tensor<T> y({n, h, w, out_ch_});
  K::gemm_nn(col.ptr(), weight_.value.ptr(), y.ptr(), rows, patch_cols, out_ch_, false);
  K::add_rowvec(bias_.value.ptr(), y.ptr(), rows, out_ch_);
  return y;
}

template <typename T>
Tensor<T> Conv2D<T>::backward(const Tensor<T>& x, const Tensor<T>&, const Tensor<T>& dy) {
  const int n = x.dim(0), h = x.dim(1), w = x.dim(2), c = x.dim(3);
  const int64_t rows = int64_t(n) * h * w;
  const int64_t patch_cols = int64_t(ksize_) * ksize_ * in_ch_;

  if (weight_.trainable) {
    Tensor<T> col({int(rows), int(patch_cols)});
    im2col(x, col);
    K::gemm_tn(col.ptr(), dy.ptr(), weight_.grad.ptr(), patch_cols, rows, out_ch_, true);
    K::colsum(dy.ptr(), bias_.grad.ptr(), rows, out_ch_, true);
  }

  // dL/d(col), then scatter-add back to dL/dx.
  Tensor<T> dcol({int(rows), int(patch_cols)});
  K::gemm_nt(dy.ptr(), weight_.value.ptr(), dcol.ptr(), rows, out_ch_, patch_cols, false);

  Tensor<T> dx({n, h, w, c});
  dx.zero();
  const int pad = ksize_ / 2;
#pragma omp parallel for schedule(static) if (n > 1)
  for (int s = 0; s < n; ++s) {
    T* dxs = dx.ptr() + int64_t(s) * h * w * c;
    const T* drow = dcol.ptr() + int64_t(s) * h * w * patch_cols;
    for (int yy = 0; yy < h; ++yy) {
      for (int xx = 0; xx < w; ++xx) {
        for (int ky = 0; ky < ksize_; ++ky) {
          const int sy = yy + ky - pad;
          if (sy < 0 || sy >= h) {
            drow += int64_t(ksize_) * c;
            continue;
          }
          for (int kx = 0; kx < ksize_; ++kx) {
            const int sx = xx + kx - pad;
            if (sx >= 0 && sx < w) {
              T* dst = dxs + (int64_t(sy) * w + sx) * c;
              for (int ch = 0; ch < c; ++ch) dst[ch] += drow[ch];
            }
            drow += c;
          }
        }
      }
    }
  }
  return dx;
}

// ------------------------------------------------------------- BatchNorm

template <typename T>
BatchNorm<T>::BatchNorm(std::string name, int channels)
    : Layer<T>(std::move(name)), channels_(channels) {
  require(channels > 0, "BatchNorm: channels must be positive");
  auto mk = [&](ParamGroup<T>& g, const char* suffix, T init, bool stat) {
    g.id = this->name() + suffix;
    g.value = Tensor<T>({channels});
    g.grad = Tensor<T>({channels});
    g.value.fill(init);
    g.statistic = stat;
    g.trainable = !stat;
  };
  mk(gamma_, ".gamma", T(1), false);
  mk(beta_, ".beta", T(0), false);
  mk(running_mean_, ".rmean", T(0), true);
  mk(running_var_, ".rvar", T(1), true);
}

template <typename T>
Tensor<T> BatchNorm<T>::forward(const Tensor<T>& x, Phase phase, bool record) {
  require(x.rank() >= 2 && x.dim(x.rank() - 1) == channels_,
          this->name() + ": trailing dim must equal channel count");
  const int64_t rows = x.size() / channels_;
  Tensor<T> y;
  y.shape = x.shape;
  y.data.resize(x.data.size());

  const bool batch_mode = (phase == Phase::train) && !frozen();
  std::vector<T> mean(channels_), inv_std(channels_), scale(channels_);

  if (batch_mode) {
    std::vector<T> var(channels_);
    K::colsum(x.ptr(), mean.data(), rows, channels_, false);
    for (auto& m : mean) m /= static_cast<T>(rows);
    K::colsumsq_centered(x.ptr(), mean.data(), var.data(), rows, channels_);
    for (auto& v : var) v /= static_cast<T>(rows);
    for (int c = 0; c < channels_; ++c) inv_std[c] = T(1) / std::sqrt(var[c] + eps_);
    // Momentum update of the running statistics (biased batch variance).
    for (int c = 0; c < channels_; ++c) {
      running_mean_.value[c] = momentum_ * running_mean_.value[c] + (T(1) - momentum_) * mean[c];
      running_var_.value[c] = momentum_ * running_var_.value[c] + (T(1) - momentum_) * var[c];
    }
  } else {
    for (int c = 0; c < channels_; ++c) {
      mean[c] = running_mean_.value[c];
      inv_std[c] = T(1) / std::sqrt(running_var_.value[c] + eps_);
    }
  }

  for (int c = 0; c < channels_; ++c) scale[c] = gamma_.value[c] * inv_std[c];
  K::affine_channels(x.ptr(), mean.data(), scale.data(), beta_.value.ptr(), y.ptr(), rows,
                     channels_);

  if (record) {
    saved_mean_ = std::move(mean);
    saved_inv_std_ = std::move(inv_std);
    saved_batch_mode_ = batch_mode;
  }
  return y;
}

template <typename T>
Tensor<T> BatchNorm<T>::backward(const Tensor<T>& x, const Tensor<T>&, const Tensor<T>& dy) {
  if (saved_mean_.empty())
    throw std::logic_error(this->name() + ": backward without recorded forward");
  const int64_t rows = x.size() / channels_;
  const T rn = T(1) / static_cast<T>(rows);

  // s1[c] = sum dy, s2[c] = sum dy*xhat without materializing xhat:
  // sum dy*xhat = (sum dy*x - mean * sum dy) * inv_std.
  std::vector<T> s1(channels_), s2(channels_);
  K::colsum(dy.ptr(), s1.data(), rows, channels_, false);
  K::col_dot(dy.ptr(), x.ptr(), s2.data(), rows, channels_, false);
  for (int c = 0; c < channels_; ++c) s2[c] = (s2[c] - saved_mean_[c] * s1[c]) * saved_inv_std_[c];

  if (gamma_.trainable) K::axpy(T(1), s2.data(), gamma_.grad.ptr(), channels_);
  if (beta_.trainable) K::axpy(T(1), s1.data(), beta_.grad.ptr(), channels_);

  Tensor<T> dx;
  dx.shape = x.shape;
  dx.data.resize(x.data.size());

  if (!saved_batch_mode_) {
    // Inference statistics are constants: dx = dy * gamma * inv_std.
    std::vector<T> scale(channels_);
    for (int c = 0; c < channels_; ++c) scale[c] = gamma_.value[c] * saved_inv_std_[c];
    K::scale_channels(dy.ptr(), scale.data(), dx.ptr(), rows, channels_);
    return dx;
  }

  std::vector<T> a(channels_), b1(channels_), b2(channels_);
  for (int c = 0; c < channels_; ++c) {
    a[c] = gamma_.value[c] * saved_inv_std_[c];
    b1[c] = s1[c] * rn;
    b2[c] = s2[c] * rn * saved_inv_std_[c];
  }
  const T* xp = x.ptr();
  const T* dyp = dy.ptr();
  T* dxp = dx.ptr();
  const auto& mean = saved_mean_;
  const int ch = channels_;
#pragma omp parallel for schedule(static) if (rows* ch > (1 << 15))
  for (int64_t r = 0; r < rows; ++r) {
    const T* xr = xp + r * ch;
    const T* dyr = dyp + r * ch;
    T* dxr = dxp + r * ch;
    for (int c = 0; c < ch; ++c) dxr[c] = a[c] * (dyr[c] - b1[c] - (xr[c] - mean[c]) * b2[c]);
  }
  return dx;
}

// ------------------------------------------------------------ activations

template <typename T>
Tensor<T> ReLU<T>::forward(const Tensor<T>& x, Phase, bool) {
  Tensor<T> y;
  y.shape = x.shape;
  y.data.resize(x.data.size());
  K::relu_fwd(x.ptr(), y.ptr(), x.size());
  return y;
}

template <typename T>
Tensor<T> ReLU<T>::backward(const Tensor<T>&, const Tensor<T>& y, const Tensor<T>& dy) {
  Tensor<T> dx;
  dx.shape = dy.shape;
  dx.data.resize(dy.data.size());
  K::relu_bwd(y.ptr(), dy.ptr(), dx.ptr(), dy.size());
  return dx;
}

template <typename T>
Tensor<T> Sigmoid<T>::forward(const Tensor<T>& x, Phase, bool) {
  Tensor<T> y;
  y.shape = x.shape;
  y.data.resize(x.data.size());
  const T* xp = x.ptr();
  T* yp = y.ptr();
  const int64_t n = x.size();
#pragma omp parallel for schedule(static) if (n > (1 << 15))
  for (int64_t i = 0; i < n; ++i) {
    const T v = xp[i];
    if (v >= T(0)) {
      yp[i] = T(1) / (T(1) + std::exp(-v));
    } else {
      const T e = std::exp(v);
      yp[i] = e / (T(1) + e);
    }
  }
  return y;
}

template <typename T>
Tensor<T> Sigmoid<T>::backward(const Tensor<T>&, const Tensor<T>& y, const Tensor<T>& dy) {
  Tensor<T> dx;
  dx.shape = dy.shape;
  dx.data.resize(dy.data.size());
  for (int64_t i = 0; i < dy.size(); ++i) dx[i] = dy[i] * y[i] * (T(1) - y[i]);
  return dx;
}

// ---------------------------------------------------------------- pooling

template <typename T>
Tensor<T> MaxPool2x2<T>::forward(const Tensor<T>& x, Phase, bool record) {
  check_nhwc(x, this->name());
  const int n = x.dim(0), h = x.dim(1), w = x.dim(2), c = x.dim(3);
  require(h % 2 == 0 && w % 2 == 0, this->name() + ": spatial dims must be even");
  const int oh = h / 2, ow = w / 2;
  Tensor<T> y({n, oh, ow, c});
  if (record) argmax_.assign(static_cast<size_t>(y.size()), 0);
#pragma omp parallel for schedule(static) if (n > 1)
  for (int s = 0; s < n; ++s) {
    const int64_t base = int64_t(s) * h * w * c;
    const T* xs = x.ptr() + base;
    T* ys = y.ptr() + int64_t(s) * oh * ow * c;
    int64_t* am = record ? argmax_.data() + int64_t(s) * oh * ow * c : nullptr;
    for (int oy = 0; oy < oh; ++oy)
      for (int ox = 0; ox < ow; ++ox)
        for (int ch = 0; ch < c; ++ch) {
          int64_t best_idx = (int64_t(2 * oy) * w + 2 * ox) * c + ch;
          T best = xs[best_idx];
          for (int py = 0; py < 2; ++py)
            for (int px = 0; px < 2; ++px) {
              const int64_t idx = (int64_t(2 * oy + py) * w + (2 * ox + px)) * c + ch;
              if (xs[idx] > best) {
                best = xs[idx];
                best_idx = idx;
              }
            }
          const int64_t out_idx = (int64_t(oy) * ow + ox) * c + ch;
          ys[out_idx] = best;
          if (am) am[out_idx] = base + best_idx;
        }
  }
  return y;
}

template <typename T>
Tensor<T> MaxPool2x2<T>::backward(const Tensor<T>& x, const Tensor<T>& y, const Tensor<T>& dy) {
  if (argmax_.size() != static_cast<size_t>(y.size()))
    throw std::logic_error(this->name() + ": backward without recorded forward");
  Tensor<T> dx;
  dx.shape = x.shape;
  dx.data.assign(x.data.size(), T(0));
  for (int64_t i = 0; i < dy.size(); ++i) dx[argmax_[static_cast<size_t>(i)]] += dy[i];
  return dx;
}

template <typename T>
Tensor<T> UpsampleNearest2x2<T>::forward(const Tensor<T>& x, Phase, bool) {
  check_nhwc(x, this->name());
  const int n = x.dim(0), h = x.dim(1), w = x.dim(2), c = x.dim(3);
  Tensor<T> y({n, 2 * h, 2 * w, c});
#pragma omp parallel for schedule(static) if (n > 1)
  for (int s = 0; s < n; ++s) {
    const T* xs = x.ptr() + int64_t(s) * h * w * c;
    T* ys = y.ptr() + int64_t(s) * 4 * h * w * c;
    for (int yy = 0; yy < h; ++yy)
      for (int xx = 0; xx < w; ++xx) {
        const T* src = xs + (int64_t(yy) * w + xx) * c;
        for (int py = 0; py < 2; ++py)
          for (int px = 0; px < 2; ++px)
            std::memcpy(ys + (int64_t(2 * yy + py) * 2 * w + (2 * xx + px)) * c, src,
                        sizeof(T) * static_cast<size_t>(c));
      }
  }
  return y;
}

template <typename T>
Tensor<T> UpsampleNearest2x2<T>::backward(const Tensor<T>& x, const Tensor<T>&,
                                          const Tensor<T>& dy) {
  const int n = x.dim(0), h = x.dim(1), w = x.dim(2), c = x.dim(3);
  Tensor<T> dx({n, h, w, c});
  dx.zero();
#pragma omp parallel for schedule(static) if (n > 1)
  for (int s = 0; s < n; ++s) {
    const T* dys = dy.ptr() + int64_t(s) * 4 * h * w * c;
    T* dxs = dx.ptr() + int64_t(s) * h * w * c;
    for (int yy = 0; yy < 2 * h; ++yy)
      for (int xx = 0; xx < 2 * w; ++xx) {
        const T* src = dys + (int64_t(yy) * 2 * w + xx) * c;
        T* dst = dxs + (int64_t(yy / 2) * w + xx / 2) * c;
        for (int ch = 0; ch < c; ++ch) dst[ch] += src[ch];
      }
  }
  return dx;
}

template <typename T>
Tensor<T> GlobalAvgPool<T>::forward(const Tensor<T>& x, Phase, bool) {
  check_nhwc(x, this->name());
  const int n = x.dim(0), h = x.dim(1), w = x.dim(2), c = x.dim(3);
  Tensor<T> y({n, c});
  const T inv = T(1) / static_cast<T>(int64_t(h) * w);
  for (int s = 0; s < n; ++s) {
    K::colsum(x.ptr() + int64_t(s) * h * w * c, y.ptr() + int64_t(s) * c, int64_t(h) * w, c,
              false);
    for (int ch = 0; ch < c; ++ch) y[int64_t(s) * c + ch] *= inv;
  }
  return y;
}

template <typename T>
Tensor<T> GlobalAvgPool<T>::backward(const Tensor<T>& x, const Tensor<T>&, const Tensor<T>& dy) {
  const int n = x.dim(0), h = x.dim(1), w = x.dim(2), c = x.dim(3);
  Tensor<T> dx({n, h, w, c});
  const T inv = T(1) / static_cast<T>(int64_t(h) * w);
  for (int s = 0; s < n; ++s)
    for (int64_t p = 0; p < int64_t(h) * w; ++p)
      for (int ch = 0; ch < c; ++ch)
        dx[(int64_t(s) * h * w + p) * c + ch] = dy[int64_t(s) * c + ch] * inv;
  return dx;
}

// ------------------------------------------------------------ SpatialGate

template <typename T>
SpatialGate<T>::SpatialGate(std::string name, int height, int width)
    : Layer<T>(std::move(name)), height_(height), width_(width) {
  require(height > 0 && width > 0, "SpatialGate: dims must be positive");
  gate_.id = this->name() + ".g";
  gate_.value = Tensor<T>({height * width});
  gate_.grad = Tensor<T>({height * width});
  gate_.value.fill(T(1));
}

template <typename T>
Tensor<T> SpatialGate<T>::forward(const Tensor<T>& x, Phase, bool) {
  check_nhwc(x, this->name());
  require(x.dim(1) == height_ && x.dim(2) == width_, this->name() + ": spatial dims mismatch");
  const int n = x.dim(0), c = x.dim(3);
  const int64_t hw = int64_t(height_) * width_;
  Tensor<T> y;
  y.shape = x.shape;
  y.data.resize(x.data.size());
  for (int s = 0; s < n; ++s)
    for (int64_t p = 0; p < hw; ++p) {
      const T g = gate_.value[p];
      const int64_t off = (int64_t(s) * hw + p) * c;
      for (int ch = 0; ch < c; ++ch) y[off + ch] = x[off + ch] * g;
    }
  return y;
}

template <typename T>
Tensor<T> SpatialGate<T>::backward(const Tensor<T>& x, const Tensor<T>&, const Tensor<T>& dy) {
  const int n = x.dim(0), c = x.dim(3);
  const int64_t hw = int64_t(height_) * width_;
  Tensor<T> dx;
  dx.shape = x.shape;
  dx.data.resize(x.data.size());
  for (int s = 0; s < n; ++s)
    for (int64_t p = 0; p < hw; ++p) {
      const T g = gate_.value[p];
      const int64_t off = (int64_t(s) * hw + p) * c;
      T acc = T(0);
      for (int ch = 0; ch < c; ++ch) {
        dx[off + ch] = dy[off + ch] * g;
        acc += dy[off + ch] * x[off + ch];
      }
      if (gate_.trainable) gate_.grad[p] += acc;
    }
  return dx;
}

// ----------------------------------------------------------------- Dense

template <typename T>
Dense<T>::Dense(std::string name, int in_features, int out_features, Rng& init_rng)
    : Layer<T>(std::move(name)), in_f_(in_features), out_f_(out_features) {
  require(in_features > 0 && out_features > 0, "Dense: feature counts must be positive");
  weight_.id = this->name() + ".w";
  weight_.value = Tensor<T>({in_features, out_features});
  weight_.grad = Tensor<T>({in_features, out_features});
  init_fan_in_uniform(weight_.value, in_features, init_rng);
  bias_.id = this->name() + ".b";
  bias_.value = Tensor<T>({out_features});
  bias_.grad = Tensor<T>({out_features});
}

template <typename T>
Tensor<T> Dense<T>::forward(const Tensor<T>& x, Phase, bool) {
  require(x.rank() == 2 && x.dim(1) == in_f_, this->name() + ": expected (N, in) input");
  const int n = x.dim(0);
  Tensor<T> y({n, out_f_});
  K::gemm_nn(x.ptr(), weight_.value.ptr(), y.ptr(), n, in_f_, out_f_, false);
  K::add_rowvec(bias_.value.ptr(), y.ptr(), n, out_f_);
  return y;
}

template <typename T>
Tensor<T> Dense<T>::backward(const Tensor<T>& x, const Tensor<T>&, const Tensor<T>& dy) {
  const int n = x.dim(0);
  if (weight_.trainable) {
    K::gemm_tn(x.ptr(), dy.ptr(), weight_.grad.ptr(), in_f_, n, out_f_, true);
    K::colsum(dy.ptr(), bias_.grad.ptr(), n, out_f_, true);
  }
  Tensor<T> dx({n, in_f_});
  K::gemm_nt(dy.ptr(), weight_.value.ptr(), dx.ptr(), n, out_f_, in_f_, false);
  return dx;
}

// ------------------------------------------------------------ Sequential

template <typename T>
Layer<T>* Sequential<T>::add(std::unique_ptr<Layer<T>> layer) {
  for (auto* g : layer->params())
    if (find_param(g->id) != nullptr)
      throw std::invalid_argument("duplicate parameter group id: " + g->id);
  layers_.push_back(std::move(layer));
  return layers_.back().get();
}

template <typename T>
Tensor<T> Sequential<T>::forward(const Tensor<T>& x, Phase phase, bool record) {
  if (!record) {
    Tensor<T> cur = x;
    for (auto& l : layers_) cur = l->forward(cur, phase, false);
    return cur;
  }
  tape_.clear();
  tape_.reserve(layers_.size() + 1);
  tape_.push_back(x);
  for (auto& l : layers_) tape_.push_back(l->forward(tape_.back(), phase, true));
  recorded_ = true;
  return tape_.back();
}

template <typename T>
Tensor<T> Sequential<T>::backward(const Tensor<T>& dy) {
  if (!recorded_) throw std::logic_error("Sequential::backward without recorded forward");
  Tensor<T> cur = dy;
  for (size_t i = layers_.size(); i-- > 0;)
    cur = layers_[i]->backward(tape_[i], tape_[i + 1], cur);
  return cur;
}

template <typename T>
std::vector<ParamGroup<T>*> Sequential<T>::params() {
  std::vector<ParamGroup<T>*> out;
  for (auto& l : layers_)
    for (auto* g : l->params()) out.push_back(g);
  return out;
}

template <typename T>
std::vector<const ParamGroup<T>*> Sequential<T>::params() const {
  std::vector<const ParamGroup<T>*> out;
  for (const auto& l : layers_)
    for (auto* g : const_cast<Layer<T>&>(*l).params()) out.push_back(g);
  return out;
}

template <typename T>
ParamGroup<T>* Sequential<T>::find_param(const std::string& id) {
  for (auto& l : layers_)
    for (auto* g : l->params())
      if (g->id == id) return g;
  return nullptr;
}

template <typename T>
void Sequential<T>::zero_grads() {
  for (auto* g : params()) g->zero_grad();
}

template <typename T>
void Sequential<T>::clear_tape() {
  tape_.clear();
  recorded_ = false;
}

// -------------------------------------------------------------- snapshots

template <typename T>
std::vector<Tensor<T>> snapshot_params(const std::vector<ParamGroup<T>*>& groups) {
  std::vector<Tensor<T>> snap;
  snap.reserve(groups.size());
  for (auto* g : groups) snap.push_back(g->value);
  return snap;
}

template <typename T>
void restore_params(const std::vector<ParamGroup<T>*>& groups, const std::vector<Tensor<T>>& snap) {
  if (groups.size() != snap.size()) throw std::logic_error("restore_params: size mismatch");
  for (size_t i = 0; i < groups.size(); ++i) groups[i]->value = snap[i];
}

template <typename T>
uint64_t params_fingerprint(const std::vector<const ParamGroup<T>*>& groups) {
  Fnv1a64 h;
  for (const auto* g : groups) {
    h.update(g->id.data(), g->id.size());
    h.update(g->value.ptr(), sizeof(T) * g->value.data.size());
  }
  return h.digest();
}

template <typename T>
uint64_t params_fingerprint(const std::vector<ParamGroup<T>*>& groups) {
  std::vector<const ParamGroup<T>*> cg(groups.begin(), groups.end());
  return params_fingerprint(cg);
}

// ---------------------------------------------------------- instantiation

#define HCAE_INSTANTIATE(T)                                                             \
  template class Conv2D<T>;                                                             \
  template class BatchNorm<T>;                                                          \
  template class ReLU<T>;                                                               \
  template class Sigmoid<T>;                                                            \
  template class MaxPool2x2<T>;                                                         \
  template class UpsampleNearest2x2<T>;                                                 \
  template class GlobalAvgPool<T>;                                                      \
  template class SpatialGate<T>;                                                        \
  template class Dense<T>;                                                              \
  template class Sequential<T>;                                                         \
  template std::vector<Tensor<T>> snapshot_params(const std::vector<ParamGroup<T>*>&); \
  template void restore_params(const std::vector<ParamGroup<T>*>&,                     \
                               const std::vector<Tensor<T>>&);                         \
  template uint64_t params_fingerprint(const std::vector<const ParamGroup<T>*>&);      \
  template uint64_t params_fingerprint(const std::vector<ParamGroup<T>*>&);

HCAE_INSTANTIATE(float)
HCAE_INSTANTIATE(double)

#undef HCAE_INSTANTIATE

}  // namespace hcae::nn

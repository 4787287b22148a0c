// Copyright (c) the hcae authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "hcae/tensor.hpp"

namespace hcae::nn {

// Mean squared error over every element. If grad is non-null it receives
// dL/d(pred). Accumulation is in double for any T.
template <typename T>
double mse_loss(const Tensor<T>& pred, const Tensor<T>& target, Tensor<T>* grad = nullptr) {
  if (!pred.same_shape(target))
    throw std::invalid_argument("mse_loss: shape mismatch " + pred.shape_str() + " vs " +
                                target.shape_str());
  const int64_t n = pred.size();
  double acc = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    const double d = double(pred[i]) - double(target[i]);
    acc += d * d;
  }
  if (grad) {
    grad->shape = pred.shape;
    grad->data.resize(pred.data.size());
    const T scale = T(2) / static_cast<T>(n);
    for (int64_t i = 0; i < n; ++i) (*grad)[i] = scale * (pred[i] - target[i]);
  }
  return acc / static_cast<double>(n);
}

// Binary cross-entropy of probabilities p against labels y in {0,1}, mean
// over the batch. Probabilities are clamped to [eps, 1-eps] before the logs;
// the gradient is exactly the derivative of that clamped expression (zero in
// the clamped region), so finite differences agree with it.
template <typename T>
double bce_loss(const Tensor<T>& p, const std::vector<int>& y, Tensor<T>* grad = nullptr,
                double eps = 1e-7) {
  const int64_t n = p.size();
  if (n != static_cast<int64_t>(y.size()))
    throw std::invalid_argument("bce_loss: probability/label count mismatch");
  if (n == 0) throw std::invalid_argument("bce_loss: empty batch");
  if (grad) {
    grad->shape = p.shape;
    grad->data.assign(p.data.size(), T(0));
  }
  double acc = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    const double pi = double(p[i]);
    const double pc = std::min(std::max(pi, eps), 1.0 - eps);
    const double yi = y[static_cast<size_t>(i)] ? 1.0 : 0.0;
    acc += -(yi * std::log(pc) + (1.0 - yi) * std::log(1.0 - pc));
    if (grad && pi > eps && pi < 1.0 - eps)
      (*grad)[i] = static_cast<T>((pc - yi) / (pc * (1.0 - pc)) / static_cast<double>(n));
  }
  return acc / static_cast<double>(n);
}

}  // namespace hcae::nn

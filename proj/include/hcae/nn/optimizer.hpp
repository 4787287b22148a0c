// Copyright (c) the hcae authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <vector>

#include "hcae/kernels/kernels.hpp"
#include "hcae/nn/layers.hpp"

namespace hcae::nn {

// Adam with bias correction. Moment state is kept per group and survives
// trainable-flag toggles; step() only touches groups that are trainable at
// that moment and never touches statistics.
template <typename T>
class Adam {
 public:
  Adam(std::vector<ParamGroup<T>*> groups, T lr, T beta1 = T(0.9), T beta2 = T(0.999),
       T eps = T(1e-8))
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    slots_.reserve(groups.size());
    for (auto* g : groups) {
      Slot s;
      s.group = g;
      s.m = Tensor<T>(g->value.shape);
      s.v = Tensor<T>(g->value.shape);
      slots_.push_back(std::move(s));
    }
  }

  void set_lr(T lr) { lr_ = lr; }
  T lr() const { return lr_; }

  void zero_grads() {
    for (auto& s : slots_) s.group->zero_grad();
  }

  void step() {
    ++t_;
    const T bc1 = T(1) - static_cast<T>(std::pow(double(beta1_), double(t_)));
    const T bc2 = T(1) - static_cast<T>(std::pow(double(beta2_), double(t_)));
    for (auto& s : slots_) {
      if (!s.group->trainable || s.group->statistic) continue;
      kernels::adam_step(s.group->value.ptr(), s.group->grad.ptr(), s.m.ptr(), s.v.ptr(),
                         s.group->value.size(), lr_, beta1_, beta2_, eps_, bc1, bc2);
    }
  }

 private:
  struct Slot {
    ParamGroup<T>* group;
    Tensor<T> m, v;
  };
  std::vector<Slot> slots_;
  T lr_, beta1_, beta2_, eps_;
  int64_t t_ = 0;
};

}  // namespace hcae::nn

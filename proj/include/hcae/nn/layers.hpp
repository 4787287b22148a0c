// Copyright (c) the hcae authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <memory>
#include <string>
#include <vector>

#include "hcae/rng.hpp"
#include "hcae/tensor.hpp"

// Minimal layer stack for the convolutional codecs and classifiers built
// here. Activations are NHWC. Instantiated for float (production) and double
// (used by the finite-difference tests).

namespace hcae::nn {

template <typename T>
struct ParamGroup {
  std::string id;
  Tensor<T> value;
  Tensor<T> grad;
  bool trainable = true;
  // Running statistics: restored from checkpoints and updated by forward
  // passes, never touched by the optimizer or set_trainable.
  bool statistic = false;

  void zero_grad() { grad.zero(); }
};

enum class Phase { train, eval };

template <typename T>
class Layer {
 public:
  explicit Layer(std::string name) : name_(std::move(name)) {}
  virtual ~Layer() = default;

  // `record` keeps whatever backward() will need. With record=false and
  // phase=eval the pass is const over the layer, so concurrent inference on
  // a shared model is safe.
  virtual Tensor<T> forward(const Tensor<T>& x, Phase phase, bool record) = 0;
  // x and y are the tensors seen by the matching recorded forward call.
  // Accumulates parameter gradients for trainable groups, returns dL/dx.
  virtual Tensor<T> backward(const Tensor<T>& x, const Tensor<T>& y, const Tensor<T>& dy) = 0;
  virtual std::vector<ParamGroup<T>*> params() { return {}; }

  const std::string& name() const { return name_; }

 private:
  std::string name_;
};

// 2D convolution, stride 1, 'same' zero padding, square odd kernel.
// Weight layout: (ksize*ksize*in_ch, out_ch) with (ky, kx, ic) row order.
template <typename T>
class Conv2D : public Layer<T> {
 public:
  Conv2D(std::string name, int in_ch, int out_ch, int ksize, Rng& init_rng);

  Tensor<T> forward(const Tensor<T>& x, Phase phase, bool record) override;
  Tensor<T> backward(const Tensor<T>& x, const Tensor<T>& y, const Tensor<T>& dy) override;
  std::vector<ParamGroup<T>*> params() override { return {&weight_, &bias_}; }

  int in_channels() const { return in_ch_; }
  int out_channels() const { return out_ch_; }

 private:
  void im2col(const Tensor<T>& x, Tensor<T>& col) const;

  int in_ch_, out_ch_, ksize_;
  ParamGroup<T> weight_, bias_;
};

// Per-channel batch normalization over (N,H,W) with momentum-0.9 running
// statistics. A frozen layer (gamma and beta both non-trainable) always runs
// in inference mode: freezing includes the statistics.
template <typename T>
class BatchNorm : public Layer<T> {
 public:
  BatchNorm(std::string name, int channels);

  Tensor<T> forward(const Tensor<T>& x, Phase phase, bool record) override;
  Tensor<T> backward(const Tensor<T>& x, const Tensor<T>& y, const Tensor<T>& dy) override;
  std::vector<ParamGroup<T>*> params() override {
    return {&gamma_, &beta_, &running_mean_, &running_var_};
  }

  bool frozen() const { return !gamma_.trainable && !beta_.trainable; }

 private:
  int channels_;
  T momentum_ = T(0.9);
  T eps_ = T(1e-5);
  ParamGroup<T> gamma_, beta_, running_mean_, running_var_;
  // Recorded by forward for backward.
  std::vector<T> saved_mean_, saved_inv_std_;
  bool saved_batch_mode_ = false;
};

template <typename T>
class ReLU : public Layer<T> {
 public:
  explicit ReLU(std::string name) : Layer<T>(std::move(name)) {}
  Tensor<T> forward(const Tensor<T>& x, Phase phase, bool record) override;
  Tensor<T> backward(const Tensor<T>& x, const Tensor<T>& y, const Tensor<T>& dy) override;
};

template <typename T>
class Sigmoid : public Layer<T> {
 public:
  explicit Sigmoid(std::string name) : Layer<T>(std::move(name)) {}
  Tensor<T> forward(const Tensor<T>& x, Phase phase, bool record) override;
  Tensor<T> backward(const Tensor<T>& x, const Tensor<T>& y, const Tensor<T>& dy) override;
};

// 2x2 max pooling, stride 2. Requires even spatial dims.
template <typename T>
class MaxPool2x2 : public Layer<T> {
 public:
  explicit MaxPool2x2(std::string name) : Layer<T>(std::move(name)) {}
  Tensor<T> forward(const Tensor<T>& x, Phase phase, bool record) override;
  Tensor<T> backward(const Tensor<T>& x, const Tensor<T>& y, const Tensor<T>& dy) override;

 private:
  std::vector<int64_t> argmax_;
};

// 2x2 nearest-neighbour up-sampling.
template <typename T>
class UpsampleNearest2x2 : public Layer<T> {
 public:
  explicit UpsampleNearest2x2(std::string name) : Layer<T>(std::move(name)) {}
  Tensor<T> forward(const Tensor<T>& x, Phase phase, bool record) override;
  Tensor<T> backward(const Tensor<T>& x, const Tensor<T>& y, const Tensor<T>& dy) override;
};

// (N,H,W,C) -> (N,C) spatial mean.
template <typename T>
class GlobalAvgPool : public Layer<T> {
 public:
  explicit GlobalAvgPool(std::string name) : Layer<T>(std::move(name)) {}
  Tensor<T> forward(const Tensor<T>& x, Phase phase, bool record) override;
  Tensor<T> backward(const Tensor<T>& x, const Tensor<T>& y, const Tensor<T>& dy) override;
};

// Learned per-position multiplicative gate, shared across channels:
// y[n,p,c] = x[n,p,c] * g[p]. Lets a global-average-pooled head weight
// spatial regions (otherwise GAP is position-blind).
template <typename T>
class SpatialGate : public Layer<T> {
 public:
  SpatialGate(std::string name, int height, int width);
  Tensor<T> forward(const Tensor<T>& x, Phase phase, bool record) override;
  Tensor<T> backward(const Tensor<T>& x, const Tensor<T>& y, const Tensor<T>& dy) override;
  std::vector<ParamGroup<T>*> params() override { return {&gate_}; }

 private:
  int height_, width_;
  ParamGroup<T> gate_;
};

template <typename T>
class Dense : public Layer<T> {
 public:
  Dense(std::string name, int in_features, int out_features, Rng& init_rng);
  Tensor<T> forward(const Tensor<T>& x, Phase phase, bool record) override;
  Tensor<T> backward(const Tensor<T>& x, const Tensor<T>& y, const Tensor<T>& dy) override;
  std::vector<ParamGroup<T>*> params() override { return {&weight_, &bias_}; }

 private:
  int in_f_, out_f_;
  ParamGroup<T> weight_, bias_;
};

template <typename T>
class Sequential {
 public:
  Layer<T>* add(std::unique_ptr<Layer<T>> layer);

  Tensor<T> forward(const Tensor<T>& x, Phase phase, bool record);
  // Walks the recorded tape backwards; returns dL/d(input).
  Tensor<T> backward(const Tensor<T>& dy);

  std::vector<ParamGroup<T>*> params();
  std::vector<const ParamGroup<T>*> params() const;
  ParamGroup<T>* find_param(const std::string& id);
  void zero_grads();
  void clear_tape();

  size_t layer_count() const { return layers_.size(); }
  Layer<T>* layer(size_t i) { return layers_[i].get(); }
  const Layer<T>* layer(size_t i) const { return layers_[i].get(); }

 private:
  std::vector<std::unique_ptr<Layer<T>>> layers_;
  std::vector<Tensor<T>> tape_;
  bool recorded_ = false;
};

// Snapshot/restore of every group value (used for best-validation
// checkpointing during training).
template <typename T>
std::vector<Tensor<T>> snapshot_params(const std::vector<ParamGroup<T>*>& groups);
template <typename T>
void restore_params(const std::vector<ParamGroup<T>*>& groups,
                    const std::vector<Tensor<T>>& snap);

// FNV-1a over the raw bytes of every group value, in order. Detects any
// parameter or statistic drift.
template <typename T>
uint64_t params_fingerprint(const std::vector<const ParamGroup<T>*>& groups);
template <typename T>
uint64_t params_fingerprint(const std::vector<ParamGroup<T>*>& groups);

}  // namespace hcae::nn

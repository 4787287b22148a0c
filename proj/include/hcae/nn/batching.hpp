// Copyright (c) the hcae authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "hcae/datasets.hpp"
#include "hcae/rng.hpp"
#include "hcae/tensor.hpp"

namespace hcae::nn {

// NHWC batch from dataset rows. Optional label sink and optional on-the-fly
// dihedral augmentation.
template <typename T>
Tensor<T> assemble_batch(const LabeledDataset& ds, const std::vector<size_t>& idx,
                         std::vector<int>* labels = nullptr, Rng* augment_rng = nullptr) {
  const ImagePatch& g = ds.samples.at(idx.at(0)).patch;
  Tensor<T> x({static_cast<int>(idx.size()), g.height, g.width, g.channels});
  if (labels) labels->clear();
  const int64_t stride = int64_t(g.height) * g.width * g.channels;
  for (size_t i = 0; i < idx.size(); ++i) {
    const LabeledSample& s = ds.samples[idx[i]];
    if (labels) labels->push_back(s.label);
    if (augment_rng) {
      const LabeledSample a = augment(s, *augment_rng);
      for (int64_t j = 0; j < stride; ++j) x[int64_t(i) * stride + j] = T(a.patch.pixels[j]);
    } else {
      for (int64_t j = 0; j < stride; ++j) x[int64_t(i) * stride + j] = T(s.patch.pixels[j]);
    }
  }
  return x;
}

template <typename T>
Tensor<T> patch_to_batch(const ImagePatch& p) {
  Tensor<T> x({1, p.height, p.width, p.channels});
  for (size_t j = 0; j < p.pixels.size(); ++j) x[static_cast<int64_t>(j)] = T(p.pixels[j]);
  return x;
}

// Epoch shuffling: deterministic permutation of [0, n).
inline std::vector<size_t> shuffled_indices(size_t n, Rng& rng) {
  std::vector<size_t> idx(n);
  for (size_t i = 0; i < n; ++i) idx[i] = i;
  for (size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[rng.next_below(i)]);
  return idx;
}

inline std::vector<std::vector<size_t>> make_batches(const std::vector<size_t>& order,
                                                     size_t batch_size) {
  std::vector<std::vector<size_t>> batches;
  for (size_t start = 0; start < order.size(); start += batch_size) {
    const size_t end = std::min(order.size(), start + batch_size);
    batches.emplace_back(order.begin() + static_cast<long>(start),
                         order.begin() + static_cast<long>(end));
  }
  return batches;
}

}  // namespace hcae::nn

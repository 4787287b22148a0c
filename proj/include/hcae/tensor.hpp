// Copyright (c) the hcae authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace hcae {

// Dense row-major tensor. Activations use (N, H, W, C) with channels fastest;
// matrices use (rows, cols).
template <typename T>
struct Tensor {
  std::vector<int> shape;
  std::vector<T> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> s) : shape(std::move(s)), data(checked_count(shape)) {}
  Tensor(std::initializer_list<int> s) : Tensor(std::vector<int>(s)) {}

  static int64_t checked_count(const std::vector<int>& s) {
    int64_t n = 1;
    for (int d : s) {
      if (d <= 0) throw std::invalid_argument("tensor dimensions must be positive");
      n *= d;
    }
    return n;
  }

  int64_t size() const { return static_cast<int64_t>(data.size()); }
  int rank() const { return static_cast<int>(shape.size()); }
  int dim(int i) const { return shape[static_cast<size_t>(i)]; }

  T* ptr() { return data.data(); }
  const T* ptr() const { return data.data(); }
  T& operator[](int64_t i) { return data[static_cast<size_t>(i)]; }
  const T& operator[](int64_t i) const { return data[static_cast<size_t>(i)]; }

  void fill(T v) { std::fill(data.begin(), data.end(), v); }
  void zero() { fill(T(0)); }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  // Reinterpret as a different shape with identical element count.
  Tensor reshaped(std::vector<int> s) const {
    Tensor out;
    if (checked_count(s) != size()) throw std::invalid_argument("reshape: element count mismatch");
    out.shape = std::move(s);
    out.data = data;
    return out;
  }

  std::string shape_str() const {
    std::ostringstream os;
    os << '(';
    for (size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
    os << ')';
    return os.str();
  }
};

template <typename T>
Tensor<T> convert_tensor(const Tensor<float>& src) {
  Tensor<T> out;
  out.shape = src.shape;
  out.data.assign(src.data.begin(), src.data.end());
  return out;
}

}  // namespace hcae

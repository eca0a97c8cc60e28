// Copyright 2026 The diffts Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

#include "dts/error.hpp"
#include "dts/rng.hpp"

namespace dts {

using Shape = std::vector<int64_t>;

std::string shape_str(const Shape& s);

// Dense row-major double tensor with value semantics. All network math in
// this codebase runs at double precision; it keeps every oracle tolerance in
// the test suite meaningful and the desk-scale cost is acceptable.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape);
  Tensor(Shape shape, double fill);

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape), 0.0); }
  static Tensor full(Shape shape, double v) { return Tensor(std::move(shape), v); }
  static Tensor randn(Shape shape, Rng& rng, double scale = 1.0);
  static Tensor rand_uniform(Shape shape, Rng& rng, double lo, double hi);
  static Tensor from_vector(const std::vector<double>& v);

  const Shape& shape() const { return shape_; }
  int64_t rank() const { return static_cast<int64_t>(shape_.size()); }
  int64_t dim(int64_t i) const;
  int64_t numel() const { return static_cast<int64_t>(data_.size()); }
  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::vector<double>& storage() { return data_; }
  const std::vector<double>& storage() const { return data_; }

  double& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
  double operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

  double& at(int64_t i, int64_t j);
  double at(int64_t i, int64_t j) const;
  double& at(int64_t i, int64_t j, int64_t k);
  double at(int64_t i, int64_t j, int64_t k) const;
  double& at(int64_t i, int64_t j, int64_t k, int64_t l);
  double at(int64_t i, int64_t j, int64_t k, int64_t l) const;

  // Same data, new shape; element count must match.
  Tensor reshaped(Shape shape) const;

  void fill(double v);
  void add_inplace(const Tensor& o, double scale = 1.0);
  void scale_inplace(double s);

  double sum() const;
  double mean() const;
  double min() const;
  double max() const;
  bool all_finite() const;

 private:
  Shape shape_;
  std::vector<double> data_;
};

// Elementwise arithmetic on raw tensors (shapes must match exactly).
Tensor operator+(const Tensor& a, const Tensor& b);
Tensor operator-(const Tensor& a, const Tensor& b);
Tensor operator*(const Tensor& a, const Tensor& b);
Tensor operator*(const Tensor& a, double s);

// c = a(M,K) * b(K,N), plain 2-D product.
Tensor matmul2d(const Tensor& a, const Tensor& b);

}  // namespace dts

// Copyright 2026 The diffts Authors
// SPDX-License-Identifier: Apache-2.0

#include "dts/tensor.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace dts {

namespace {
int64_t count_elems(const Shape& shape) {
  int64_t n = 1;
  for (int64_t d : shape) {
    check_contract(d >= 0, "tensor dimension must be non-negative");
    n *= d;
  }
  return n;
}
}  // namespace

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "(";
  for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ")";
  return os.str();
}

Tensor::Tensor(Shape shape) : shape_(std::move(shape)), data_(static_cast<size_t>(count_elems(shape_)), 0.0) {}

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), data_(static_cast<size_t>(count_elems(shape_)), fill) {}

Tensor Tensor::randn(Shape shape, Rng& rng, double scale) {
  Tensor t(std::move(shape));
  for (auto& v : t.data_) v = rng.normal() * scale;
  return t;
}

Tensor Tensor::rand_uniform(Shape shape, Rng& rng, double lo, double hi) {
  Tensor t(std::move(shape));
  for (auto& v : t.data_) v = lo + (hi - lo) * rng.uniform();
  return t;
}

Tensor Tensor::from_vector(const std::vector<double>& v) {
  Tensor t({static_cast<int64_t>(v.size())});
  t.data_ = v;
  return t;
}

int64_t Tensor::dim(int64_t i) const {
  check_contract(i >= 0 && i < rank(), "tensor dim index out of range");
  return shape_[static_cast<size_t>(i)];
}

double& Tensor::at(int64_t i, int64_t j) {
  return data_[static_cast<size_t>(i * shape_[1] + j)];
}
double Tensor::at(int64_t i, int64_t j) const {
  return data_[static_cast<size_t>(i * shape_[1] + j)];
}
double& Tensor::at(int64_t i, int64_t j, int64_t k) {
  return data_[static_cast<size_t>((i * shape_[1] + j) * shape_[2] + k)];
}
double Tensor::at(int64_t i, int64_t j, int64_t k) const {
  return data_[static_cast<size_t>((i * shape_[1] + j) * shape_[2] + k)];
}
double& Tensor::at(int64_t i, int64_t j, int64_t k, int64_t l) {
  return data_[static_cast<size_t>(((i * shape_[1] + j) * shape_[2] + k) * shape_[3] + l)];
}
double Tensor::at(int64_t i, int64_t j, int64_t k, int64_t l) const {
  return data_[static_cast<size_t>(((i * shape_[1] + j) * shape_[2] + k) * shape_[3] + l)];
}

Tensor Tensor::reshaped(Shape shape) const {
  check_contract(count_elems(shape) == numel(),
                 "reshape element count mismatch: " + shape_str(shape_) + " -> " + shape_str(shape));
  Tensor t;
  t.shape_ = std::move(shape);
  t.data_ = data_;
  return t;
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

void Tensor::add_inplace(const Tensor& o, double scale) {
  check_contract(same_shape(o), "add_inplace shape mismatch: " + shape_str(shape_) + " vs " + shape_str(o.shape_));
  const double* src = o.data();
  double* dst = data();
  for (int64_t i = 0, n = numel(); i < n; ++i) dst[i] += scale * src[i];
}

void Tensor::scale_inplace(double s) {
  for (auto& v : data_) v *= s;
}

double Tensor::sum() const { return std::accumulate(data_.begin(), data_.end(), 0.0); }
double Tensor::mean() const { return numel() ? sum() / static_cast<double>(numel()) : 0.0; }
double Tensor::min() const { return *std::min_element(data_.begin(), data_.end()); }
double Tensor::max() const { return *std::max_element(data_.begin(), data_.end()); }

bool Tensor::all_finite() const {
  for (double v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

namespace {
Tensor ew(const Tensor& a, const Tensor& b, double (*f)(double, double)) {
  check_contract(a.same_shape(b),
                 "elementwise shape mismatch: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  Tensor c(a.shape());
  for (int64_t i = 0, n = a.numel(); i < n; ++i) c[i] = f(a[i], b[i]);
  return c;
}
}  // namespace

Tensor operator+(const Tensor& a, const Tensor& b) {
  return ew(a, b, [](double x, double y) { return x + y; });
}
Tensor operator-(const Tensor& a, const Tensor& b) {
  return ew(a, b, [](double x, double y) { return x - y; });
}
Tensor operator*(const Tensor& a, const Tensor& b) {
  return ew(a, b, [](double x, double y) { return x * y; });
}
Tensor operator*(const Tensor& a, double s) {
  Tensor c = a;
  c.scale_inplace(s);
  return c;
}

Tensor matmul2d(const Tensor& a, const Tensor& b) {
  check_contract(a.rank() == 2 && b.rank() == 2 && a.dim(1) == b.dim(0),
                 "matmul2d shape mismatch: " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  Tensor c({a.dim(0), b.dim(1)});
  using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Eigen::Map<const Mat> ma(a.data(), a.dim(0), a.dim(1));
  Eigen::Map<const Mat> mb(b.data(), b.dim(0), b.dim(1));
  Eigen::Map<Mat> mc(c.data(), c.dim(0), c.dim(1));
  mc.noalias() = ma * mb;
  return c;
}

}  // namespace dts

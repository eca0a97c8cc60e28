// Copyright 2026 The diffts Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "dts/tensor.hpp"

namespace dts {
namespace ad {

// Reverse-mode autodiff over a dynamically built DAG. Every op records a
// closure that routes the output gradient to its parents; backward() runs
// them in reverse topological order. Ops built while grad mode is disabled
// produce detached leaves, which keeps sampling loops cheap.

struct Node;
using NodePtr = std::shared_ptr<Node>;

struct Node {
  Tensor value;
  Tensor grad;
  bool requires_grad = false;
  bool grad_init = false;
  std::vector<NodePtr> parents;
  std::function<void(Node&)> backprop;  // reads this->grad, accumulates into parents

  void accumulate(const Tensor& g);
};

class Var {
 public:
  Var() = default;
  explicit Var(NodePtr n) : node_(std::move(n)) {}

  bool defined() const { return node_ != nullptr; }
  const Tensor& value() const { return node_->value; }
  Tensor& value_mut() { return node_->value; }
  const Tensor& grad() const { return node_->grad; }
  bool has_grad() const { return node_ && node_->grad_init; }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  NodePtr node() const { return node_; }
  const Shape& shape() const { return node_->value.shape(); }

 private:
  NodePtr node_;
};

// Leaf constructors.
Var constant(Tensor value);
Var param(Tensor value);  // requires_grad = true
// Detach: same value, no graph history.
Var detach(const Var& v);

// Scoped grad-mode switch (thread-local).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;

 private:
  bool prev_;
};
bool grad_enabled();

// Runs reverse-mode accumulation from a scalar root.
void backward(const Var& root);
// Clears gradients in the subgraph under root (backward() does this itself).
void zero_grads(const Var& root);

// ---- elementwise ----
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var add_scalar(const Var& a, double s);
Var mul_scalar(const Var& a, double s);
Var square(const Var& a);
Var relu(const Var& a);
Var gelu(const Var& a);
Var swish(const Var& a);
Var sigmoid(const Var& a);
Var tanh_op(const Var& a);
Var exp_op(const Var& a);
Var log_op(const Var& a);
Var clamp(const Var& a, double lo, double hi);

// ---- broadcasting ----
// x(..., C) + b(C)
Var add_bias(const Var& x, const Var& b);
// x(B, L, C) + r(B, C), r broadcast over L
Var add_rows_bcast(const Var& x, const Var& r);
// x * s where s is a 1-element Var
Var mul_by_scalar_var(const Var& x, const Var& s);

// ---- linear algebra ----
Var matmul(const Var& a, const Var& b);     // (M,K)x(K,N)
Var matmul_nt(const Var& a, const Var& b);  // (M,K)x(N,K)^T -> (M,N)
// x(..., Cin) -> (..., Cout); W(Cin, Cout), optional bias(Cout)
Var linear(const Var& x, const Var& w, const Var* b = nullptr);

// ---- convolutions (stride 1, zero 'same' padding) ----
// x(B, L, Cin), w(k, Cin, Cout), bias(Cout) optional, symmetric dilation
Var conv1d(const Var& x, const Var& w, const Var* b, int64_t dilation);
// x(B, C, H, W), w(Cin, kh, kw, Cout), pad kh/2 x kw/2, configurable strides
Var conv2d(const Var& x, const Var& w, const Var* b, int64_t stride_h, int64_t stride_w);

// ---- normalization & attention ----
Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps = 1e-5);
Var layer_norm_plain(const Var& x, double eps = 1e-5);
Var softmax_lastdim(const Var& x);
Var log_softmax_lastdim(const Var& x);
// q,k,v: (B, L, D); D divisible by heads; key_mask (B, L) optional, 0 = drop key
Var multihead_attention(const Var& q, const Var& k, const Var& v, int64_t heads,
                        const Tensor* key_mask = nullptr);
Var l2_normalize_rows(const Var& x, double eps = 1e-12);

// ---- indexing / shape ----
Var reshape(const Var& x, Shape shape);
Var embedding(const Var& table, const std::vector<int64_t>& ids);  // (n, E)
Var gather_rows(const Var& x, const std::vector<int64_t>& idx);    // x(N,C) -> (M,C)
// Length-regulator expansion: rows of x(K, C) repeated durations[i] times.
Var repeat_rows(const Var& x, const std::vector<int64_t>& durations);
Var concat_rows(const Var& a, const Var& b);  // (Na,C) + (Nb,C) -> (Na+Nb,C)
// Contiguous channel slice of the last dimension: (..., C) -> (..., len).
Var slice_lastdim(const Var& x, int64_t start, int64_t len);

// ---- reductions ----
Var sum_all(const Var& x);
Var mean_all(const Var& x);
// x(B, L, C), mask(B, L): mean over elements of valid frames.
Var masked_mean(const Var& x, const Tensor& mask);
// -(1/M) * sum_i x[i,i] for square x.
Var neg_mean_diag(const Var& x);
// Global average pool over H,W: x(B,C,H,W) -> (B,C)
Var global_avg_pool2d(const Var& x);
// x(B,C) viewed as per-channel scale applied to y(B,C,H,W)
Var scale_channels(const Var& y, const Var& gate);

}  // namespace ad
}  // namespace dts

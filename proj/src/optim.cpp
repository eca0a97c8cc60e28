// Copyright 2026 The diffts Authors
// SPDX-License-Identifier: Apache-2.0

#include "dts/optim.hpp"

#include <cmath>

namespace dts {

Adam::Adam(std::vector<ad::Var> params, Config cfg) : params_(std::move(params)), cfg_(cfg) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const auto& p : params_) {
    m_.emplace_back(Tensor::zeros(p.value().shape()));
    v_.emplace_back(Tensor::zeros(p.value().shape()));
  }
}

void Adam::step() {
  ++step_count_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_count_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_count_));
  for (size_t i = 0; i < params_.size(); ++i) {
    auto node = params_[i].node();
    if (!node->grad_init) continue;
    const Tensor& g = node->grad;
    Tensor& m = m_[i];
    Tensor& v = v_[i];
    Tensor& w = node->value;
    for (int64_t j = 0, n = w.numel(); j < n; ++j) {
      m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * g[j];
      v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * g[j] * g[j];
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      w[j] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }
  clear_grads();
}

void Adam::clear_grads() {
  for (auto& p : params_) {
    p.node()->grad_init = false;
    p.node()->grad = Tensor();
  }
}

}  // namespace dts

// Copyright 2026 The diffts Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "dts/autodiff.hpp"
#include "dts/nn.hpp"

namespace dts {

// Adam with bias correction. Parameters without an accumulated gradient are
// skipped by step(); gradients are cleared after each step.
class Adam {
 public:
  struct Config {
    double lr = 2e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
  };

  Adam(std::vector<ad::Var> params, Config cfg);
  Adam(const nn::ParamMap& params, Config cfg) : Adam(params.vars(), cfg) {}

  void step();
  void clear_grads();
  int64_t step_count() const { return step_count_; }

  // Exposed for checkpoint resume.
  std::vector<Tensor>& moments1() { return m_; }
  std::vector<Tensor>& moments2() { return v_; }
  void set_step_count(int64_t t) { step_count_ = t; }

 private:
  std::vector<ad::Var> params_;
  std::vector<Tensor> m_, v_;
  Config cfg_;
  int64_t step_count_ = 0;
};

}  // namespace dts

// Copyright 2026 The diffts Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "dts/tensor.hpp"

namespace dts {

// Per-step noise schedule shared by every diffusion model. All quantities are
// stored at double precision and indexed by 1-based step t in [1, T]; the
// cumulative product alpha_bar(0) is defined as 1 so the t=1 posterior
// variance is well-defined (and zero). Immutable after construction.
struct NoiseSchedule {
  int steps = 0;                   // T
  double beta_min = 0.0, beta_max = 0.0;
  std::vector<double> betas;       // betas[t-1] = beta_t
  std::vector<double> alphas;      // 1 - beta_t
  std::vector<double> alpha_bars;  // prod_{i<=t} alpha_i

  double beta(int t) const;
  double alpha(int t) const;
  double alpha_bar(int t) const;       // alpha_bar(0) == 1
  double posterior_sigma(int t) const; // sqrt((1-a_bar_{t-1})/(1-a_bar_t)*(1-a_t))
};

// Evenly spaced beta_t from beta_min (t=1) to beta_max (t=T).
NoiseSchedule make_linear_schedule(double beta_min, double beta_max, int steps);

// x_t = sqrt(a_bar_t) * x0 + sqrt(1 - a_bar_t) * eps, elementwise.
Tensor forward_sample(const Tensor& x0, int t, const Tensor& eps, const NoiseSchedule& sched);

// One reverse transition: mu_theta(x_t, eps_hat) + sigma_theta(t) * psi.
// Callers must pass psi = 0 at t = 1; sigma_theta(1) is 0 regardless.
Tensor reverse_step(const Tensor& x_t, const Tensor& eps_hat, int t, const NoiseSchedule& sched,
                    const Tensor& psi);

}  // namespace dts

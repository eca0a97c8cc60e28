// Copyright 2026 The diffts Authors
// SPDX-License-Identifier: Apache-2.0

#include "dts/schedules.hpp"

#include <cmath>
#include <string>

#include "dts/error.hpp"

namespace dts {

namespace {
void check_step(const NoiseSchedule& s, int t) {
  check_contract(t >= 1 && t <= s.steps,
                 "diffusion step " + std::to_string(t) + " outside [1," + std::to_string(s.steps) + "]");
}
}  // namespace

double NoiseSchedule::beta(int t) const {
  check_step(*this, t);
  return betas[static_cast<size_t>(t - 1)];
}

double NoiseSchedule::alpha(int t) const {
  check_step(*this, t);
  return alphas[static_cast<size_t>(t - 1)];
}

double NoiseSchedule::alpha_bar(int t) const {
  if (t == 0) return 1.0;
  check_step(*this, t);
  return alpha_bars[static_cast<size_t>(t - 1)];
}

double NoiseSchedule::posterior_sigma(int t) const {
  check_step(*this, t);
  const double var = (1.0 - alpha_bar(t - 1)) / (1.0 - alpha_bar(t)) * (1.0 - alpha(t));
  return std::sqrt(var);
}

NoiseSchedule make_linear_schedule(double beta_min, double beta_max, int steps) {
  check_config(steps >= 1, "noise schedule needs at least 1 step, got " + std::to_string(steps));
  check_config(beta_min > 0.0 && beta_max < 1.0 && beta_min <= beta_max,
               "beta bounds must satisfy 0 < beta_min <= beta_max < 1, got [" + std::to_string(beta_min) +
                   ", " + std::to_string(beta_max) + "]");
  NoiseSchedule s;
  s.steps = steps;
  s.beta_min = beta_min;
  s.beta_max = beta_max;
  s.betas.resize(static_cast<size_t>(steps));
  s.alphas.resize(static_cast<size_t>(steps));
  s.alpha_bars.resize(static_cast<size_t>(steps));
  double bar = 1.0;
  for (int i = 0; i < steps; ++i) {
    const double frac = steps == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(steps - 1);
    const double beta = beta_min + (beta_max - beta_min) * frac;
    s.betas[static_cast<size_t>(i)] = beta;
    s.alphas[static_cast<size_t>(i)] = 1.0 - beta;
    bar *= 1.0 - beta;
    s.alpha_bars[static_cast<size_t>(i)] = bar;
  }
  return s;
}

Tensor forward_sample(const Tensor& x0, int t, const Tensor& eps, const NoiseSchedule& sched) {
  check_contract(x0.same_shape(eps), "forward_sample: x0 shape " + shape_str(x0.shape()) +
                                         " != eps shape " + shape_str(eps.shape()));
  check_step(sched, t);
  const double bar = sched.alpha_bar(t);
  const double a = std::sqrt(bar);
  const double b = std::sqrt(1.0 - bar);
  Tensor out(x0.shape());
  for (int64_t i = 0, n = x0.numel(); i < n; ++i) out[i] = a * x0[i] + b * eps[i];
  return out;
}

Tensor reverse_step(const Tensor& x_t, const Tensor& eps_hat, int t, const NoiseSchedule& sched,
                    const Tensor& psi) {
  check_contract(x_t.same_shape(eps_hat) && x_t.same_shape(psi),
                 "reverse_step: x_t " + shape_str(x_t.shape()) + ", eps_hat " + shape_str(eps_hat.shape()) +
                     ", psi " + shape_str(psi.shape()) + " must share one shape");
  check_step(sched, t);
  const double alpha = sched.alpha(t);
  const double inv_sqrt_alpha = 1.0 / std::sqrt(alpha);
  const double eps_coef = (1.0 - alpha) / std::sqrt(1.0 - sched.alpha_bar(t));
  const double sigma = sched.posterior_sigma(t);
  Tensor out(x_t.shape());
  for (int64_t i = 0, n = x_t.numel(); i < n; ++i)
    out[i] = inv_sqrt_alpha * (x_t[i] - eps_coef * eps_hat[i]) + sigma * psi[i];
  return out;
}

}  // namespace dts

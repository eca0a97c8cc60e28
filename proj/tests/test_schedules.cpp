// Copyright 2026 The diffts Authors
// SPDX-License-Identifier: Apache-2.0

#include "dts/schedules.hpp"

#include <cmath>

#include "doctest.h"
#include "dts/error.hpp"
#include "dts/rng.hpp"

using namespace dts;

TEST_CASE("linear schedule endpoints and spacing") {
  NoiseSchedule s = make_linear_schedule(1e-4, 0.05, 200);
  CHECK(s.steps == 200);
  CHECK(s.beta(1) == doctest::Approx(1e-4).epsilon(1e-12));
  CHECK(s.beta(200) == doctest::Approx(0.05).epsilon(1e-12));
  CHECK(s.betas.size() == 200);
  // evenly spaced
  const double step = (0.05 - 1e-4) / 199.0;
  for (int t = 2; t <= 200; ++t) CHECK(s.beta(t) - s.beta(t - 1) == doctest::Approx(step).epsilon(1e-9));
}

TEST_CASE("single-step degenerate schedule") {
  NoiseSchedule s = make_linear_schedule(0.1, 0.1, 1);
  CHECK(s.betas.size() == 1);
  CHECK(s.beta(1) == doctest::Approx(0.1));
  CHECK(s.alpha(1) == doctest::Approx(0.9));
  CHECK(s.alpha_bar(1) == doctest::Approx(0.9));
}

TEST_CASE("alpha_bar matches independent high-precision product") {
  NoiseSchedule s = make_linear_schedule(1e-4, 0.05, 200);
  long double bar = 1.0L;
  for (int t = 1; t <= 200; ++t) {
    const long double beta =
        1e-4L + (0.05L - 1e-4L) * static_cast<long double>(t - 1) / 199.0L;
    bar *= 1.0L - beta;
    CHECK(s.alpha_bar(t) == doctest::Approx(static_cast<double>(bar)).epsilon(1e-12));
  }
}

TEST_CASE("schedule invariants") {
  NoiseSchedule s = make_linear_schedule(1e-4, 0.05, 200);
  CHECK(s.alpha_bar(1) == s.alpha(1));  // exact
  for (int t = 1; t <= 200; ++t) {
    CHECK(s.beta(t) > 0.0);
    CHECK(s.beta(t) < 1.0);
    CHECK(s.alpha_bar(t) > 0.0);
    CHECK(s.alpha_bar(t) < 1.0);
    if (t >= 2) {
      CHECK(s.alpha_bar(t) < s.alpha_bar(t - 1));  // strictly decreasing
      // telescoping: alpha_bars[t] = alpha_bars[t-1] * alphas[t]
      CHECK(s.alpha_bar(t) == doctest::Approx(s.alpha_bar(t - 1) * s.alpha(t)).epsilon(1e-14));
    }
  }
  CHECK(s.alpha_bar(0) == 1.0);
}

TEST_CASE("schedule rejects invalid configuration") {
  CHECK_THROWS_AS(make_linear_schedule(0.0, 0.1, 10), ConfigError);
  CHECK_THROWS_AS(make_linear_schedule(1e-4, 1.0, 10), ConfigError);
  CHECK_THROWS_AS(make_linear_schedule(0.2, 0.1, 10), ConfigError);
  CHECK_THROWS_AS(make_linear_schedule(1e-4, 0.05, 0), ConfigError);
  CHECK_THROWS_AS(make_linear_schedule(-0.1, 0.05, 10), ConfigError);
}

TEST_CASE("forward_sample: zero noise scales by sqrt(alpha_bar)") {
  NoiseSchedule s = make_linear_schedule(1e-4, 0.05, 50);
  Rng rng(5);
  Tensor x0 = Tensor::randn({4, 7}, rng);
  Tensor eps = Tensor::zeros({4, 7});
  for (int t : {1, 25, 50}) {
    Tensor xt = forward_sample(x0, t, eps, s);
    const double a = std::sqrt(s.alpha_bar(t));
    for (int64_t i = 0; i < x0.numel(); ++i) CHECK(xt[i] == doctest::Approx(a * x0[i]).epsilon(1e-15));
  }
}

TEST_CASE("forward_sample: identity limit as beta -> 0") {
  NoiseSchedule s = make_linear_schedule(1e-12, 1e-12, 5);
  Rng rng(6);
  Tensor x0 = Tensor::randn({3, 3}, rng);
  Tensor eps = Tensor::randn({3, 3}, rng);
  Tensor xt = forward_sample(x0, 5, eps, s);
  for (int64_t i = 0; i < x0.numel(); ++i) CHECK(xt[i] == doctest::Approx(x0[i]).epsilon(1e-5));
}

TEST_CASE("forward_sample: Monte-Carlo variance matches 1 - alpha_bar") {
  NoiseSchedule s = make_linear_schedule(1e-4, 0.05, 200);
  const int t = 120;
  const int n = 10000;
  Rng rng(7);
  Tensor x0 = Tensor::zeros({1});
  double sum = 0.0, sum2 = 0.0;
  for (int i = 0; i < n; ++i) {
    Tensor eps({1});
    eps[0] = rng.normal();
    const double v = forward_sample(x0, t, eps, s)[0];
    sum += v;
    sum2 += v * v;
  }
  const double mean = sum / n;
  const double var = sum2 / n - mean * mean;
  const double expect = 1.0 - s.alpha_bar(t);
  const double se = expect * std::sqrt(2.0 / (n - 1));  // SE of variance of a Gaussian
  CHECK(std::abs(var - expect) < 3.0 * se);
}

TEST_CASE("forward_sample rejects shape mismatch and bad t") {
  NoiseSchedule s = make_linear_schedule(1e-4, 0.05, 10);
  Tensor x0 = Tensor::zeros({2, 3});
  CHECK_THROWS_AS(forward_sample(x0, 3, Tensor::zeros({3, 2}), s), ContractError);
  CHECK_THROWS_AS(forward_sample(x0, 0, Tensor::zeros({2, 3}), s), ContractError);
  CHECK_THROWS_AS(forward_sample(x0, 11, Tensor::zeros({2, 3}), s), ContractError);
}

TEST_CASE("reverse_step: sigma is 0 at t=1 and positive for t>1") {
  NoiseSchedule s = make_linear_schedule(1e-4, 0.05, 64);
  CHECK(s.posterior_sigma(1) == 0.0);
  for (int t = 2; t <= 64; ++t) CHECK(s.posterior_sigma(t) > 0.0);

  // at t=1 the output equals mu regardless of enforced psi = 0
  Rng rng(8);
  Tensor xt = Tensor::randn({2, 5}, rng);
  Tensor eh = Tensor::randn({2, 5}, rng);
  Tensor psi = Tensor::zeros({2, 5});
  Tensor out = reverse_step(xt, eh, 1, s, psi);
  const double inv_sqrt_a = 1.0 / std::sqrt(s.alpha(1));
  const double coef = (1.0 - s.alpha(1)) / std::sqrt(1.0 - s.alpha_bar(1));
  for (int64_t i = 0; i < out.numel(); ++i)
    CHECK(out[i] == doctest::Approx(inv_sqrt_a * (xt[i] - coef * eh[i])).epsilon(1e-14));
}

TEST_CASE("reverse_step inverts forward_sample exactly at T=1") {
  NoiseSchedule s = make_linear_schedule(0.3, 0.3, 1);
  Rng rng(9);
  Tensor x0 = Tensor::randn({3, 4}, rng);
  Tensor eps = Tensor::randn({3, 4}, rng);
  Tensor x1 = forward_sample(x0, 1, eps, s);
  Tensor psi = Tensor::zeros({3, 4});
  Tensor rec = reverse_step(x1, eps, 1, s, psi);
  for (int64_t i = 0; i < x0.numel(); ++i) CHECK(std::abs(rec[i] - x0[i]) < 1e-10);
}

TEST_CASE("reverse_step: zero inputs map to zero") {
  NoiseSchedule s = make_linear_schedule(1e-3, 0.02, 16);
  Tensor z = Tensor::zeros({4});
  for (int t = 1; t <= 16; ++t) {
    Tensor out = reverse_step(z, z, t, s, z);
    for (int64_t i = 0; i < 4; ++i) CHECK(out[i] == 0.0);
  }
}

TEST_CASE("reverse_step matches symbolically expanded affine form on random inputs") {
  NoiseSchedule s = make_linear_schedule(2e-4, 0.04, 37);
  Rng rng(10);
  for (int trial = 0; trial < 20; ++trial) {
    const int t = static_cast<int>(rng.uniform_int(1, 37));
    Tensor xt = Tensor::randn({6}, rng);
    Tensor eh = Tensor::randn({6}, rng);
    Tensor psi = t == 1 ? Tensor::zeros({6}) : Tensor::randn({6}, rng);
    Tensor out = reverse_step(xt, eh, t, s, psi);

    // independent long-double expansion of Alg. 2 lines 3-5
    const long double beta = 2e-4L + (0.04L - 2e-4L) * static_cast<long double>(t - 1) / 36.0L;
    const long double alpha = 1.0L - beta;
    long double bar = 1.0L, bar_prev = 1.0L;
    for (int i = 1; i <= t; ++i) {
      const long double bi = 2e-4L + (0.04L - 2e-4L) * static_cast<long double>(i - 1) / 36.0L;
      bar_prev = bar;
      bar *= 1.0L - bi;
    }
    const long double cx = 1.0L / std::sqrt(alpha);
    const long double ce = -cx * (1.0L - alpha) / std::sqrt(1.0L - bar);
    const long double cp = std::sqrt((1.0L - bar_prev) / (1.0L - bar) * (1.0L - alpha));
    for (int64_t i = 0; i < 6; ++i) {
      const long double expect = cx * xt[i] + ce * eh[i] + cp * psi[i];
      CHECK(std::abs(out[i] - static_cast<double>(expect)) < 1e-10);
    }
  }
}

TEST_CASE("reverse_step rejects out-of-range t and mismatched shapes") {
  NoiseSchedule s = make_linear_schedule(1e-4, 0.05, 8);
  Tensor a = Tensor::zeros({2});
  CHECK_THROWS_AS(reverse_step(a, a, 0, s, a), ContractError);
  CHECK_THROWS_AS(reverse_step(a, a, 9, s, a), ContractError);
  CHECK_THROWS_AS(reverse_step(a, Tensor::zeros({3}), 1, s, a), ContractError);
}

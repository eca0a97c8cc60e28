// Copyright 2026 The diffts Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "dts/autodiff.hpp"
#include "dts/rng.hpp"
#include "dts/schedules.hpp"

namespace dts {

// Abstract denoiser: predicts the injected noise from (x_t, t, prompt, cond).
// Implementations must be deterministic given identical inputs and parameters;
// all sampling noise is injected by the trainer/sampler, never by the denoiser.
class Denoiser {
 public:
  virtual ~Denoiser() = default;
  // x_t (B, L, C); t one 1-based step per batch item; prompt (B, P) optional;
  // cond (B, Ls, Dc); mask (B, L) optional validity flags. Returns (B, L, C).
  virtual ad::Var denoise(const Tensor& x_t, const std::vector<int>& t, const std::optional<ad::Var>& prompt,
                          const Tensor& cond, const Tensor* mask) = 0;
  virtual int64_t data_channels() const = 0;
};

// One training batch. The prompt is a graph Var so encoder gradients (the VAE
// path) flow through the diffusion loss when present. When item_seeds is set,
// each item's (t, eps) draws come from its own stream, which makes the loss
// invariant under batch permutation applied jointly to items and seeds.
struct DiffusionBatch {
  Tensor x0;    // (B, L, C)
  Tensor cond;  // (B, Ls, Dc)
  std::optional<ad::Var> prompt;
  Tensor mask;  // (B, L); 1 = valid frame
  std::optional<std::vector<uint64_t>> item_seeds;
};

// Single Alg.-1 step: sample t ~ U{1..T} and eps ~ N(0,I) per item, form x_t
// in closed form, and return the mean squared error between eps and the
// denoiser prediction over valid frames. Masked positions of x0 (and of cond,
// when cond runs at x0's frame rate) are zeroed before the denoiser sees them.
ad::Var training_loss(const DiffusionBatch& batch, Denoiser& denoiser, const NoiseSchedule& sched, Rng& rng);

// Full Alg.-2 reverse loop: x_T ~ N(0,I), then T reverse transitions with
// psi ~ N(0,I) for t > 1 and psi = 0 at t = 1. Runs without building graphs.
Tensor sample(const Shape& shape, const Tensor& cond, const std::optional<ad::Var>& prompt,
              Denoiser& denoiser, const NoiseSchedule& sched, Rng& rng);

}  // namespace dts

// Copyright 2026 The diffts Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <utility>

#include "dts/autodiff.hpp"
#include "dts/nn.hpp"
#include "dts/rng.hpp"

namespace dts {

struct PromptEncoderConfig {
  int64_t mel_bands = 40;
  int64_t window_frames = 300;  // 3 s at hop 240 / 24 kHz
  int64_t embed_dim = 64;
  int64_t base_channels = 32;   // conv ramp base(1,2,3,4,6,8) -> 32..256
  int64_t se_reduction = 8;
  int64_t pre_vae_dim = 128;
  double logvar_min = -10.0;
  double logvar_max = 10.0;

  void validate() const;
};

struct KlAnnealConfig {
  int64_t warm_start = 5000;  // stage 1: reconstruction only
  int64_t ramp_len = 20000;   // linear ramp to w_max
  double w_max = 1e-2;
};

// Crops a contiguous `window` frame slice with a uniformly random start;
// shorter inputs are repeat-padded to the window length first.
Tensor crop_prompt(const Tensor& mel, int64_t window, Rng& rng);

// Hinged KL against the unit Gaussian: mean over the batch of
// max(0, sum_i 0.5*(mu_i^2 + sigma_i^2 - 1 - ln sigma_i^2) - margin).
ad::Var kl_loss(const ad::Var& mu, const ad::Var& sigma, double margin);

// Plain (unhinged) KL value of one embedding, for probes and tests.
double kl_divergence(const Tensor& mu, const Tensor& sigma);

// Annealing weight: 0 before warm_start, then linear to w_max over ramp_len.
double kl_weight(int64_t step, const KlAnnealConfig& cfg);

// VAE extractor of paralinguistic state from a fixed-size mel window:
// 6 stride-(1,2) 2-D conv layers, one SE-ResNet block, global average
// pooling, then the Gaussian posterior head over a 64-dim embedding.
class PromptEncoder {
 public:
  PromptEncoder() = default;
  PromptEncoder(PromptEncoderConfig cfg, Rng& rng);

  // windows (B, window_frames, mel_bands) -> (mu (B,E), sigma (B,E) > 0)
  std::pair<ad::Var, ad::Var> encode(const Tensor& windows);

  // G = mu + sigma * phi with phi ~ N(0, I) (reparameterized).
  ad::Var sample_embedding(const ad::Var& mu, const ad::Var& sigma, Rng& rng);

  const PromptEncoderConfig& config() const { return cfg_; }
  void reg(nn::ParamMap& pm, const std::string& prefix);

  // Test access: the SE excitation layer (zeroing it fixes the gate at 0.5)
  // and the residual branch of the SE block.
  nn::Linear& se_excite() { return se_fc2_; }
  ad::Var se_branch(const ad::Var& x4d) const;  // F(x) of the SE-ResNet block

 private:
  ad::Var conv_trunk(const Tensor& windows) const;  // (B, C, T, 1)

  PromptEncoderConfig cfg_;
  std::vector<nn::Conv2d> convs_;
  nn::Conv2d se_conv1_, se_conv2_;
  nn::Linear se_fc1_, se_fc2_;
  nn::Linear pre_vae_, mu_head_, logvar_head_;
};

}  // namespace dts

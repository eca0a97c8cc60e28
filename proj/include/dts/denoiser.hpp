// Copyright 2026 The diffts Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <string>
#include <vector>

#include "dts/diffusion.hpp"
#include "dts/nn.hpp"

namespace dts {

enum class ModelKind { acoustic, semantic, duration, wave };

ModelKind model_kind_from_string(const std::string& s);
std::string to_string(ModelKind k);

struct DenoiserConfig {
  int64_t residual_layers = 30;  // N, grouped into `blocks` blocks
  int64_t blocks = 3;            // m; dilation doubles within each block from 1
  int64_t channels = 64;
  int64_t kernel = 3;
  int64_t step_embed_dim = 128;  // sinusoidal code width
  int64_t step_hidden = 512;     // width after the two affine+swish stages
  int64_t cond_dim = 512;        // conditioning input channels
  int64_t cond_hidden = 512;     // conditioner encoder width
  int64_t cond_layers = 2;       // transformer layers in the conditioner
  int64_t cond_heads = 4;
  int64_t cond_ffn = 1024;
  int64_t cond_upsample = 1;     // length-regulator factor after encoding
  bool cond_positions = true;
  int64_t out_channels = 40;
  bool use_prompt = false;
  int64_t prompt_dim = 64;
  bool zero_init_output = true;  // fresh nets predict exactly zero

  int64_t layers_per_block() const;       // n = N/m; must divide evenly
  std::vector<int64_t> dilations() const; // one entry per residual layer
  int64_t receptive_field() const;        // 1 + (kernel-1) * sum(dilations)
  void validate() const;
};

// Residual dilated-convolution denoiser: gated (tanh * sigmoid) WaveNet-style
// layers, conditioning added as a per-layer bias after each dilated conv,
// prompt and step embeddings broadcast over length and added to each layer's
// input, skip connections summed and projected to the data channels.
class DilatedConvDenoiser : public Denoiser {
 public:
  DilatedConvDenoiser(DenoiserConfig cfg, Rng& rng);

  ad::Var denoise(const Tensor& x_t, const std::vector<int>& t, const std::optional<ad::Var>& prompt,
                  const Tensor& cond, const Tensor* mask) override;
  int64_t data_channels() const override { return cfg_.out_channels; }

  const DenoiserConfig& config() const { return cfg_; }
  nn::ParamMap& params() { return params_; }

 private:
  struct ResidualLayer {
    nn::Conv1d dilated;    // channels -> 2*channels
    nn::Conv1d cond_proj;  // cond_hidden -> 2*channels, 1x1
    nn::Linear step_proj;  // step_hidden -> channels
    nn::Conv1d out_proj;   // channels -> 2*channels, 1x1 (residual + skip)
  };

  ad::Var encode_steps(const std::vector<int>& t) const;  // (B, step_hidden)

  DenoiserConfig cfg_;
  nn::Conv1d input_proj_;
  nn::Linear step_fc1_, step_fc2_;
  nn::Linear prompt_proj_;
  nn::TransformerEncoder conditioner_;
  std::vector<ResidualLayer> layers_;
  nn::Conv1d skip_proj_;
  nn::Conv1d output_proj_;
  nn::ParamMap params_;
};

// Builds a denoiser wired for one of the four diffusion models: data channels
// and conditioning per model (acoustic: mel from semantic; semantic: joint
// space from expanded phonemes; duration: one scalar per phoneme; wave:
// samples from mel upsampled by the hop). `base` carries the experiment's
// size overrides; fields that are per-kind (channels counts, upsampling,
// prompt wiring) are set here.
std::unique_ptr<DilatedConvDenoiser> instantiate_for(ModelKind kind, DenoiserConfig base, Rng& rng);

// Per-kind wiring without construction (exposed for config/checkpoint code).
DenoiserConfig config_for(ModelKind kind, DenoiserConfig base);

}  // namespace dts

// Copyright 2026 The diffts Authors
// SPDX-License-Identifier: Apache-2.0

#include "dts/denoiser.hpp"

#include <cmath>

namespace dts {

using ad::Var;

ModelKind model_kind_from_string(const std::string& s) {
  if (s == "acoustic") return ModelKind::acoustic;
  if (s == "semantic") return ModelKind::semantic;
  if (s == "duration") return ModelKind::duration;
  if (s == "wave") return ModelKind::wave;
  throw ConfigError("unknown model kind: '" + s + "' (expected acoustic|semantic|duration|wave)");
}

std::string to_string(ModelKind k) {
  switch (k) {
    case ModelKind::acoustic: return "acoustic";
    case ModelKind::semantic: return "semantic";
    case ModelKind::duration: return "duration";
    case ModelKind::wave: return "wave";
  }
  return "?";
}

int64_t DenoiserConfig::layers_per_block() const {
  check_config(blocks >= 1 && residual_layers >= 1 && residual_layers % blocks == 0,
               "residual_layers (" + std::to_string(residual_layers) + ") must be a multiple of blocks (" +
                   std::to_string(blocks) + ")");
  return residual_layers / blocks;
}

std::vector<int64_t> DenoiserConfig::dilations() const {
  const int64_t n = layers_per_block();
  std::vector<int64_t> d(static_cast<size_t>(residual_layers));
  for (int64_t i = 0; i < residual_layers; ++i) d[static_cast<size_t>(i)] = int64_t{1} << (i % n);
  return d;
}

int64_t DenoiserConfig::receptive_field() const {
  int64_t sum = 0;
  for (int64_t d : dilations()) sum += d;
  return 1 + (kernel - 1) * sum;
}

void DenoiserConfig::validate() const {
  layers_per_block();
  check_config(kernel >= 1 && kernel % 2 == 1, "kernel size must be odd");
  check_config(channels >= 1 && out_channels >= 1 && cond_dim >= 1 && cond_hidden >= 1, "channel counts must be >= 1");
  check_config(step_embed_dim >= 2 && step_embed_dim % 2 == 0, "step_embed_dim must be even");
  check_config(cond_upsample >= 1, "cond_upsample must be >= 1");
  check_config(cond_layers >= 0 && cond_heads >= 1 && cond_hidden % cond_heads == 0,
               "conditioner heads must divide cond_hidden");
  if (use_prompt) check_config(prompt_dim >= 1, "prompt_dim must be >= 1");
}

DilatedConvDenoiser::DilatedConvDenoiser(DenoiserConfig cfg, Rng& rng) : cfg_(cfg) {
  cfg_.validate();
  input_proj_ = nn::Conv1d(cfg_.out_channels, cfg_.channels, 1, 1, rng);
  step_fc1_ = nn::Linear(cfg_.step_embed_dim, cfg_.step_hidden, rng);
  step_fc2_ = nn::Linear(cfg_.step_hidden, cfg_.step_hidden, rng);
  if (cfg_.use_prompt) prompt_proj_ = nn::Linear(cfg_.prompt_dim, cfg_.channels, rng);
  conditioner_ = nn::TransformerEncoder(cfg_.cond_dim, cfg_.cond_hidden, cfg_.cond_layers, cfg_.cond_heads,
                                        cfg_.cond_ffn, cfg_.cond_positions, rng);
  const auto dils = cfg_.dilations();
  layers_.reserve(dils.size());
  for (int64_t d : dils) {
    ResidualLayer layer;
    layer.dilated = nn::Conv1d(cfg_.channels, 2 * cfg_.channels, cfg_.kernel, d, rng);
    layer.cond_proj = nn::Conv1d(cfg_.cond_hidden, 2 * cfg_.channels, 1, 1, rng);
    layer.step_proj = nn::Linear(cfg_.step_hidden, cfg_.channels, rng);
    layer.out_proj = nn::Conv1d(cfg_.channels, 2 * cfg_.channels, 1, 1, rng);
    layers_.push_back(std::move(layer));
  }
  skip_proj_ = nn::Conv1d(cfg_.channels, cfg_.channels, 1, 1, rng);
  output_proj_ = cfg_.zero_init_output ? nn::Conv1d::zeros(cfg_.channels, cfg_.out_channels, 1)
                                       : nn::Conv1d(cfg_.channels, cfg_.out_channels, 1, 1, rng);

  input_proj_.reg(params_, "input_proj");
  step_fc1_.reg(params_, "step_fc1");
  step_fc2_.reg(params_, "step_fc2");
  if (cfg_.use_prompt) prompt_proj_.reg(params_, "prompt_proj");
  conditioner_.reg(params_, "conditioner");
  for (size_t i = 0; i < layers_.size(); ++i) {
    const std::string p = "layer" + std::to_string(i);
    layers_[i].dilated.reg(params_, p + ".dilated");
    layers_[i].cond_proj.reg(params_, p + ".cond_proj");
    layers_[i].step_proj.reg(params_, p + ".step_proj");
    layers_[i].out_proj.reg(params_, p + ".out_proj");
  }
  skip_proj_.reg(params_, "skip_proj");
  output_proj_.reg(params_, "output_proj");
}

Var DilatedConvDenoiser::encode_steps(const std::vector<int>& t) const {
  const int64_t bsz = static_cast<int64_t>(t.size());
  Tensor codes({bsz, cfg_.step_embed_dim});
  for (int64_t b = 0; b < bsz; ++b) {
    Tensor code = nn::sinusoid_step(t[static_cast<size_t>(b)], cfg_.step_embed_dim);
    std::copy(code.data(), code.data() + cfg_.step_embed_dim, codes.data() + b * cfg_.step_embed_dim);
  }
  Var h = ad::constant(std::move(codes));
  h = ad::swish(step_fc1_(h));
  return ad::swish(step_fc2_(h));
}

Var DilatedConvDenoiser::denoise(const Tensor& x_t, const std::vector<int>& t,
                                 const std::optional<ad::Var>& prompt, const Tensor& cond,
                                 const Tensor* mask) {
  check_contract(x_t.rank() == 3, "denoise: x_t must be (B,L,C)");
  const int64_t bsz = x_t.dim(0), len = x_t.dim(1);
  check_contract(x_t.dim(2) == cfg_.out_channels, "denoise: x_t has " + std::to_string(x_t.dim(2)) +
                                                      " channels, model expects " +
                                                      std::to_string(cfg_.out_channels));
  check_contract(static_cast<int64_t>(t.size()) == bsz, "denoise: need one step per batch item");
  check_contract(cond.rank() == 3 && cond.dim(0) == bsz && cond.dim(2) == cfg_.cond_dim,
                 "denoise: cond must be (B,Ls," + std::to_string(cfg_.cond_dim) + "), got " +
                     shape_str(cond.shape()));
  if (cfg_.use_prompt) {
    check_contract(prompt.has_value(), "denoise: this model kind requires a prompt embedding");
    check_contract(prompt->value().rank() == 2 && prompt->value().dim(0) == bsz &&
                       prompt->value().dim(1) == cfg_.prompt_dim,
                   "denoise: prompt must be (B," + std::to_string(cfg_.prompt_dim) + ")");
  } else {
    check_contract(!prompt.has_value(), "denoise: prompt supplied but this model kind takes none");
  }
  const int64_t ls = cond.dim(1);
  check_contract(ls * cfg_.cond_upsample == len,
                 "denoise: conditioning of length " + std::to_string(ls) + " upsampled x" +
                     std::to_string(cfg_.cond_upsample) + " cannot align to data length " + std::to_string(len));

  // Conditioner encoder (then repeat to the data rate when upsampling).
  const Tensor* enc_mask = (mask && ls == len) ? mask : nullptr;
  Var cond_enc = conditioner_(ad::constant(cond), enc_mask);
  if (cfg_.cond_upsample > 1) {
    std::vector<int64_t> reps(static_cast<size_t>(bsz * ls), cfg_.cond_upsample);
    Var flat = ad::reshape(cond_enc, {bsz * ls, cfg_.cond_hidden});
    cond_enc = ad::reshape(ad::repeat_rows(flat, reps), {bsz, len, cfg_.cond_hidden});
  }

  Var step = encode_steps(t);  // (B, step_hidden)
  Var prompt_bias;
  if (cfg_.use_prompt) prompt_bias = prompt_proj_(*prompt);  // (B, channels), shared across layers
  Var x = ad::relu(input_proj_(ad::constant(x_t)));

  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  Var skip_sum;
  for (auto& layer : layers_) {
    Var h = ad::add_rows_bcast(x, layer.step_proj(step));
    if (cfg_.use_prompt) h = ad::add_rows_bcast(h, prompt_bias);
    Var z = ad::add(layer.dilated(h), layer.cond_proj(cond_enc));
    Var gated = ad::mul(ad::tanh_op(ad::slice_lastdim(z, 0, cfg_.channels)),
                        ad::sigmoid(ad::slice_lastdim(z, cfg_.channels, cfg_.channels)));
    Var both = layer.out_proj(gated);
    Var residual = ad::slice_lastdim(both, 0, cfg_.channels);
    Var skip = ad::slice_lastdim(both, cfg_.channels, cfg_.channels);
    x = ad::mul_scalar(ad::add(x, residual), inv_sqrt2);
    skip_sum = skip_sum.defined() ? ad::add(skip_sum, skip) : skip;
  }

  Var head = ad::mul_scalar(skip_sum, 1.0 / std::sqrt(static_cast<double>(layers_.size())));
  head = ad::relu(skip_proj_(ad::relu(head)));
  return output_proj_(head);
}

DenoiserConfig config_for(ModelKind kind, DenoiserConfig base) {
  DenoiserConfig cfg = base;
  switch (kind) {
    case ModelKind::acoustic:
      cfg.out_channels = 40;
      cfg.cond_upsample = 1;
      cfg.use_prompt = true;
      break;
    case ModelKind::semantic:
      cfg.out_channels = 512;
      cfg.cond_upsample = 1;
      cfg.use_prompt = false;
      break;
    case ModelKind::duration:
      cfg.out_channels = 1;
      cfg.cond_upsample = 1;
      cfg.use_prompt = false;
      // short cycle sized for phoneme-length sequences
      cfg.residual_layers = 8;
      cfg.blocks = 2;
      break;
    case ModelKind::wave:
      cfg.out_channels = 1;
      cfg.cond_dim = 40;
      cfg.cond_upsample = 240;
      cfg.use_prompt = true;
      break;
  }
  return cfg;
}

std::unique_ptr<DilatedConvDenoiser> instantiate_for(ModelKind kind, DenoiserConfig base, Rng& rng) {
  return std::make_unique<DilatedConvDenoiser>(config_for(kind, base), rng);
}

}  // namespace dts

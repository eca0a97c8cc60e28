// Copyright 2026 The diffts Authors
// SPDX-License-Identifier: Apache-2.0

#include "dts/nn.hpp"

#include <cmath>

namespace dts {
namespace nn {

using ad::Var;

void ParamMap::add(const std::string& name, ad::Var v) {
  check_contract(find(name) == nullptr, "duplicate parameter name: " + name);
  items_.emplace_back(name, std::move(v));
}

ad::Var* ParamMap::find(const std::string& name) {
  for (auto& [n, v] : items_)
    if (n == name) return &v;
  return nullptr;
}

std::vector<ad::Var> ParamMap::vars() const {
  std::vector<ad::Var> out;
  out.reserve(items_.size());
  for (auto& [n, v] : items_) out.push_back(v);
  return out;
}

int64_t ParamMap::total_params() const {
  int64_t n = 0;
  for (auto& [name, v] : items_) n += v.value().numel();
  return n;
}

Tensor sinusoid_positions(int64_t len, int64_t dim) {
  Tensor pe({len, dim});
  for (int64_t pos = 0; pos < len; ++pos)
    for (int64_t i = 0; i < dim / 2; ++i) {
      const double freq = std::pow(10000.0, -2.0 * static_cast<double>(i) / static_cast<double>(dim));
      pe.at(pos, 2 * i) = std::sin(pos * freq);
      pe.at(pos, 2 * i + 1) = std::cos(pos * freq);
    }
  return pe;
}

Tensor sinusoid_step(int64_t t, int64_t dim) {
  Tensor pe({dim});
  for (int64_t i = 0; i < dim / 2; ++i) {
    const double freq = std::pow(10000.0, -2.0 * static_cast<double>(i) / static_cast<double>(dim));
    pe[2 * i] = std::sin(t * freq);
    pe[2 * i + 1] = std::cos(t * freq);
  }
  return pe;
}

namespace {
Tensor xavier(Shape shape, int64_t fan_in, int64_t fan_out, Rng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  return Tensor::rand_uniform(std::move(shape), rng, -a, a);
}
}  // namespace

Linear::Linear(int64_t in, int64_t out, Rng& rng, bool bias) : has_bias(bias) {
  w = ad::param(xavier({in, out}, in, out, rng));
  if (bias) b = ad::param(Tensor::zeros({out}));
}

Linear Linear::zeros(int64_t in, int64_t out, bool bias) {
  Linear l;
  l.has_bias = bias;
  l.w = ad::param(Tensor::zeros({in, out}));
  if (bias) l.b = ad::param(Tensor::zeros({out}));
  return l;
}

Var Linear::operator()(const Var& x) const { return ad::linear(x, w, has_bias ? &b : nullptr); }

void Linear::reg(ParamMap& pm, const std::string& prefix) {
  pm.add(prefix + ".w", w);
  if (has_bias) pm.add(prefix + ".b", b);
}

Conv1d::Conv1d(int64_t in, int64_t out, int64_t kernel, int64_t dil, Rng& rng) : dilation(dil) {
  w = ad::param(xavier({kernel, in, out}, kernel * in, kernel * out, rng));
  b = ad::param(Tensor::zeros({out}));
}

Conv1d Conv1d::zeros(int64_t in, int64_t out, int64_t kernel) {
  Conv1d c;
  c.dilation = 1;
  c.w = ad::param(Tensor::zeros({kernel, in, out}));
  c.b = ad::param(Tensor::zeros({out}));
  return c;
}

Var Conv1d::operator()(const Var& x) const { return ad::conv1d(x, w, &b, dilation); }

void Conv1d::reg(ParamMap& pm, const std::string& prefix) {
  pm.add(prefix + ".w", w);
  pm.add(prefix + ".b", b);
}

Conv2d::Conv2d(int64_t in, int64_t out, int64_t kh, int64_t kw, int64_t sh, int64_t sw, Rng& rng)
    : stride_h(sh), stride_w(sw) {
  w = ad::param(xavier({in, kh, kw, out}, in * kh * kw, out * kh * kw, rng));
  b = ad::param(Tensor::zeros({out}));
}

Var Conv2d::operator()(const Var& x) const { return ad::conv2d(x, w, &b, stride_h, stride_w); }

void Conv2d::reg(ParamMap& pm, const std::string& prefix) {
  pm.add(prefix + ".w", w);
  pm.add(prefix + ".b", b);
}

LayerNorm::LayerNorm(int64_t dim) {
  gamma = ad::param(Tensor::full({dim}, 1.0));
  beta = ad::param(Tensor::zeros({dim}));
}

Var LayerNorm::operator()(const Var& x) const { return ad::layer_norm(x, gamma, beta); }

void LayerNorm::reg(ParamMap& pm, const std::string& prefix) {
  pm.add(prefix + ".gamma", gamma);
  pm.add(prefix + ".beta", beta);
}

Embedding::Embedding(int64_t vocab, int64_t dim, Rng& rng) {
  table = ad::param(Tensor::randn({vocab, dim}, rng, 0.05));
}

Var Embedding::operator()(const std::vector<int64_t>& ids) const { return ad::embedding(table, ids); }

void Embedding::reg(ParamMap& pm, const std::string& prefix) { pm.add(prefix + ".table", table); }

TransformerLayer::TransformerLayer(int64_t dim, int64_t n_heads, int64_t ffn_dim, Rng& rng)
    : wq(dim, dim, rng),
      wk(dim, dim, rng),
      wv(dim, dim, rng),
      wo(dim, dim, rng),
      ff1(dim, ffn_dim, rng),
      ff2(ffn_dim, dim, rng),
      ln1(dim),
      ln2(dim),
      heads(n_heads) {}

Var TransformerLayer::operator()(const Var& x, const Tensor* key_mask) const {
  Var h = ln1(x);
  Var attn = ad::multihead_attention(wq(h), wk(h), wv(h), heads, key_mask);
  Var y = ad::add(x, wo(attn));
  Var f = ln2(y);
  return ad::add(y, ff2(ad::gelu(ff1(f))));
}

void TransformerLayer::reg(ParamMap& pm, const std::string& prefix) {
  wq.reg(pm, prefix + ".wq");
  wk.reg(pm, prefix + ".wk");
  wv.reg(pm, prefix + ".wv");
  wo.reg(pm, prefix + ".wo");
  ff1.reg(pm, prefix + ".ff1");
  ff2.reg(pm, prefix + ".ff2");
  ln1.reg(pm, prefix + ".ln1");
  ln2.reg(pm, prefix + ".ln2");
}

TransformerEncoder::TransformerEncoder(int64_t in_dim, int64_t hidden_dim, int64_t n_layers, int64_t heads,
                                       int64_t ffn_dim, bool positions, Rng& rng)
    : in_proj(in_dim, hidden_dim, rng), final_ln(hidden_dim), use_positions(positions), hidden(hidden_dim) {
  for (int64_t i = 0; i < n_layers; ++i) layers.emplace_back(hidden_dim, heads, ffn_dim, rng);
}

Var TransformerEncoder::operator()(const Var& x, const Tensor* key_mask) const {
  Var h = in_proj(x);
  if (use_positions) {
    const int64_t bsz = h.value().dim(0), len = h.value().dim(1);
    Tensor pe = sinusoid_positions(len, hidden);
    Tensor full({bsz, len, hidden});
    for (int64_t b = 0; b < bsz; ++b)
      std::copy(pe.data(), pe.data() + len * hidden, full.data() + b * len * hidden);
    h = ad::add(h, ad::constant(std::move(full)));
  }
  for (const auto& layer : layers) h = layer(h, key_mask);
  return final_ln(h);
}

void TransformerEncoder::reg(ParamMap& pm, const std::string& prefix) {
  in_proj.reg(pm, prefix + ".in_proj");
  for (size_t i = 0; i < layers.size(); ++i) layers[i].reg(pm, prefix + ".layer" + std::to_string(i));
  final_ln.reg(pm, prefix + ".final_ln");
}

}  // namespace nn
}  // namespace dts

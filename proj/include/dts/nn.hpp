// Copyright 2026 The diffts Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <utility>
#include <vector>

#include "dts/autodiff.hpp"
#include "dts/rng.hpp"

namespace dts {
namespace nn {

// Named parameter collection; the unit optimizers and checkpoints work with.
class ParamMap {
 public:
  void add(const std::string& name, ad::Var v);
  ad::Var* find(const std::string& name);
  const std::vector<std::pair<std::string, ad::Var>>& items() const { return items_; }
  std::vector<ad::Var> vars() const;
  int64_t total_params() const;

 private:
  std::vector<std::pair<std::string, ad::Var>> items_;
};

// Sinusoidal code for positions 0..len-1 (transformer convention).
Tensor sinusoid_positions(int64_t len, int64_t dim);
// Sinusoidal code of a single diffusion step index (1-based t works fine).
Tensor sinusoid_step(int64_t t, int64_t dim);

struct Linear {
  ad::Var w, b;
  bool has_bias = true;

  Linear() = default;
  Linear(int64_t in, int64_t out, Rng& rng, bool bias = true);
  static Linear zeros(int64_t in, int64_t out, bool bias = true);

  ad::Var operator()(const ad::Var& x) const;
  void reg(ParamMap& pm, const std::string& prefix);
};

struct Conv1d {
  ad::Var w, b;
  int64_t dilation = 1;

  Conv1d() = default;
  Conv1d(int64_t in, int64_t out, int64_t kernel, int64_t dilation, Rng& rng);
  static Conv1d zeros(int64_t in, int64_t out, int64_t kernel);

  ad::Var operator()(const ad::Var& x) const;  // x(B,L,Cin) -> (B,L,Cout)
  void reg(ParamMap& pm, const std::string& prefix);
};

struct Conv2d {
  ad::Var w, b;
  int64_t stride_h = 1, stride_w = 1;

  Conv2d() = default;
  Conv2d(int64_t in, int64_t out, int64_t kh, int64_t kw, int64_t stride_h, int64_t stride_w, Rng& rng);

  ad::Var operator()(const ad::Var& x) const;  // x(B,C,H,W)
  void reg(ParamMap& pm, const std::string& prefix);
};

struct LayerNorm {
  ad::Var gamma, beta;

  LayerNorm() = default;
  explicit LayerNorm(int64_t dim);

  ad::Var operator()(const ad::Var& x) const;
  void reg(ParamMap& pm, const std::string& prefix);
};

struct Embedding {
  ad::Var table;

  Embedding() = default;
  Embedding(int64_t vocab, int64_t dim, Rng& rng);

  ad::Var operator()(const std::vector<int64_t>& ids) const;  // (n, dim)
  int64_t vocab() const { return table.value().dim(0); }
  void reg(ParamMap& pm, const std::string& prefix);
};

// Pre-LN transformer encoder layer with GELU feed-forward.
struct TransformerLayer {
  Linear wq, wk, wv, wo, ff1, ff2;
  LayerNorm ln1, ln2;
  int64_t heads = 4;

  TransformerLayer() = default;
  TransformerLayer(int64_t dim, int64_t heads, int64_t ffn_dim, Rng& rng);

  ad::Var operator()(const ad::Var& x, const Tensor* key_mask = nullptr) const;
  void reg(ParamMap& pm, const std::string& prefix);
};

// Input projection + optional sinusoidal positions + N pre-LN layers + final LN.
struct TransformerEncoder {
  Linear in_proj;
  std::vector<TransformerLayer> layers;
  LayerNorm final_ln;
  bool use_positions = true;
  int64_t hidden = 0;

  TransformerEncoder() = default;
  TransformerEncoder(int64_t in_dim, int64_t hidden, int64_t n_layers, int64_t heads, int64_t ffn_dim,
                     bool use_positions, Rng& rng);

  ad::Var operator()(const ad::Var& x, const Tensor* key_mask = nullptr) const;  // x(B,L,in) -> (B,L,hidden)
  void reg(ParamMap& pm, const std::string& prefix);
};

}  // namespace nn
}  // namespace dts

// Copyright 2026 The diffts Authors
// SPDX-License-Identifier: Apache-2.0

#include "dts/diffusion.hpp"

#include <cstring>
#include <string>

namespace dts {

namespace {

// Zeroes every channel of frames whose mask flag is 0.
Tensor zero_masked(const Tensor& x, const Tensor& mask) {
  Tensor out = x;
  const int64_t bsz = x.dim(0), len = x.dim(1), c = x.dim(2);
  for (int64_t b = 0; b < bsz; ++b)
    for (int64_t l = 0; l < len; ++l)
      if (mask.at(b, l) == 0.0)
        std::memset(out.data() + (b * len + l) * c, 0, sizeof(double) * static_cast<size_t>(c));
  return out;
}

}  // namespace

ad::Var training_loss(const DiffusionBatch& batch, Denoiser& denoiser, const NoiseSchedule& sched, Rng& rng) {
  const Tensor& x0 = batch.x0;
  check_contract(x0.rank() == 3, "training_loss: x0 must be (B,L,C), got " + shape_str(x0.shape()));
  const int64_t bsz = x0.dim(0), len = x0.dim(1), ch = x0.dim(2);
  check_contract(batch.mask.rank() == 2 && batch.mask.dim(0) == bsz && batch.mask.dim(1) == len,
                 "training_loss: mask must be (B,L)");
  check_contract(batch.cond.rank() == 3 && batch.cond.dim(0) == bsz, "training_loss: cond must be (B,Ls,Dc)");
  if (batch.item_seeds)
    check_contract(static_cast<int64_t>(batch.item_seeds->size()) == bsz,
                   "training_loss: item_seeds size must equal batch size");
  int64_t valid = 0;
  for (int64_t i = 0; i < batch.mask.numel(); ++i) valid += batch.mask[i] != 0.0 ? 1 : 0;
  check_contract(valid > 0, "training_loss: mask marks no valid frames");

  Tensor x0z = zero_masked(x0, batch.mask);
  Tensor cond = batch.cond.dim(1) == len ? zero_masked(batch.cond, batch.mask) : batch.cond;

  // Per-item t and eps (Alg. 1 lines 3 and 5), then x_t in closed form.
  std::vector<int> t(static_cast<size_t>(bsz));
  Tensor eps({bsz, len, ch});
  Tensor x_t({bsz, len, ch});
  const int64_t item = len * ch;
  for (int64_t b = 0; b < bsz; ++b) {
    Rng own = batch.item_seeds ? Rng((*batch.item_seeds)[static_cast<size_t>(b)]) : rng.split(0);
    Rng& r = batch.item_seeds ? own : rng;
    t[static_cast<size_t>(b)] = static_cast<int>(r.uniform_int(1, sched.steps));
    Tensor x0_item({len, ch});
    Tensor eps_item({len, ch});
    std::memcpy(x0_item.data(), x0z.data() + b * item, sizeof(double) * static_cast<size_t>(item));
    for (int64_t i = 0; i < item; ++i) eps_item[i] = r.normal();
    Tensor xt_item = forward_sample(x0_item, t[static_cast<size_t>(b)], eps_item, sched);
    std::memcpy(eps.data() + b * item, eps_item.data(), sizeof(double) * static_cast<size_t>(item));
    std::memcpy(x_t.data() + b * item, xt_item.data(), sizeof(double) * static_cast<size_t>(item));
  }

  ad::Var eps_hat = denoiser.denoise(x_t, t, batch.prompt, cond, &batch.mask);
  check_contract(eps_hat.value().same_shape(x0),
                 "training_loss: denoiser returned " + shape_str(eps_hat.value().shape()) + ", expected " +
                     shape_str(x0.shape()));
  ad::Var diff = ad::sub(eps_hat, ad::constant(std::move(eps)));
  return ad::masked_mean(ad::square(diff), batch.mask);
}

Tensor sample(const Shape& shape, const Tensor& cond, const std::optional<ad::Var>& prompt,
              Denoiser& denoiser, const NoiseSchedule& sched, Rng& rng) {
  check_contract(shape.size() == 3, "sample: shape must be (B,L,C)");
  const int64_t bsz = shape[0];
  check_contract(cond.rank() == 3 && cond.dim(0) == bsz, "sample: cond must be (B,Ls,Dc)");

  ad::NoGradGuard no_grad;
  Tensor x = Tensor::randn(shape, rng);  // x_T ~ N(0, I)
  std::vector<int> t_vec(static_cast<size_t>(bsz));
  for (int t = sched.steps; t >= 1; --t) {
    std::fill(t_vec.begin(), t_vec.end(), t);
    Tensor eps_hat = denoiser.denoise(x, t_vec, prompt, cond, nullptr).value();
    check_contract(eps_hat.same_shape(x), "sample: denoiser output shape mismatch");
    Tensor psi = t > 1 ? Tensor::randn(shape, rng) : Tensor::zeros(shape);
    x = reverse_step(x, eps_hat, t, sched, psi);
  }
  return x;
}

}  // namespace dts

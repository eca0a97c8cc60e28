// Copyright 2026 The diffts Authors
// SPDX-License-Identifier: Apache-2.0

#include "dts/autodiff.hpp"

#include <cmath>

#include "doctest.h"
#include "dts/error.hpp"
#include "testutil.hpp"

using namespace dts;
using namespace dts::ad;
using dts::testutil::max_grad_rel_error;

namespace {

Var rand_param(Shape shape, Rng& rng, double scale = 0.5) {
  return param(Tensor::randn(std::move(shape), rng, scale));
}

}  // namespace

TEST_CASE("elementwise ops: values and gradients") {
  Rng rng(11);
  Var a = rand_param({3, 4}, rng);
  Var b = rand_param({3, 4}, rng);

  SUBCASE("add/sub/mul") {
    auto loss = [&] { return sum_all(mul(add(a, b), sub(a, b))); };  // sum(a^2 - b^2)
    CHECK(max_grad_rel_error(loss, {a, b}) < 1e-7);
  }
  SUBCASE("scalar ops and square") {
    auto loss = [&] { return mean_all(square(add_scalar(mul_scalar(a, 3.0), 0.7))); };
    CHECK(max_grad_rel_error(loss, {a}) < 1e-7);
  }
  SUBCASE("activations") {
    for (auto f : {relu, gelu, swish, sigmoid, tanh_op}) {
      auto loss = [&] { return sum_all(f(mul_scalar(a, 2.0))); };
      CHECK(max_grad_rel_error(loss, {a}) < 1e-6);
    }
  }
  SUBCASE("exp/log") {
    auto loss = [&] { return sum_all(log_op(add_scalar(exp_op(a), 1.0))); };
    CHECK(max_grad_rel_error(loss, {a}) < 1e-7);
  }
  SUBCASE("clamp passes gradient only inside bounds") {
    Var c = param(Tensor::from_vector({-2.0, -0.5, 0.5, 2.0}));
    Var loss = sum_all(clamp(c, -1.0, 1.0));
    backward(loss);
    CHECK(c.grad()[0] == 0.0);
    CHECK(c.grad()[1] == 1.0);
    CHECK(c.grad()[2] == 1.0);
    CHECK(c.grad()[3] == 0.0);
  }
}

TEST_CASE("broadcast ops") {
  Rng rng(12);
  Var x = rand_param({2, 5, 3}, rng);
  Var bias = rand_param({3}, rng);
  Var rows = rand_param({2, 3}, rng);
  Var s = rand_param({1}, rng);

  auto l1 = [&] { return sum_all(square(add_bias(x, bias))); };
  CHECK(max_grad_rel_error(l1, {x, bias}) < 1e-7);

  auto l2 = [&] { return sum_all(square(add_rows_bcast(x, rows))); };
  CHECK(max_grad_rel_error(l2, {x, rows}) < 1e-7);

  auto l3 = [&] { return sum_all(square(mul_by_scalar_var(x, s))); };
  CHECK(max_grad_rel_error(l3, {x, s}) < 1e-7);
}

TEST_CASE("matmul family") {
  Rng rng(13);
  Var a = rand_param({4, 3}, rng);
  Var b = rand_param({3, 5}, rng);
  Var c = rand_param({6, 3}, rng);
  Var w = rand_param({3, 2}, rng);
  Var bb = rand_param({2}, rng);
  Var x3 = rand_param({2, 4, 3}, rng);

  auto l1 = [&] { return sum_all(square(matmul(a, b))); };
  CHECK(max_grad_rel_error(l1, {a, b}) < 1e-7);

  auto l2 = [&] { return sum_all(square(matmul_nt(a, c))); };
  CHECK(max_grad_rel_error(l2, {a, c}) < 1e-7);

  auto l3 = [&] { return sum_all(square(linear(x3, w, &bb))); };
  CHECK(max_grad_rel_error(l3, {x3, w, bb}) < 1e-7);

  // value check: matmul_nt(a, c) == a * c^T
  Tensor direct = matmul2d(a.value(), [&] {
    Tensor ct({3, 6});
    for (int i = 0; i < 6; ++i)
      for (int j = 0; j < 3; ++j) ct.at(j, i) = c.value().at(i, j);
    return ct;
  }());
  Tensor got = matmul_nt(a, c).value();
  for (int64_t i = 0; i < got.numel(); ++i) CHECK(got[i] == doctest::Approx(direct[i]));
}

TEST_CASE("conv1d: identity kernel, padding, dilation, gradients") {
  Rng rng(14);

  SUBCASE("identity kernel reproduces input") {
    Var x = rand_param({1, 6, 2}, rng);
    Tensor w({3, 2, 2}, 0.0);
    w.at(1, 0, 0) = 1.0;  // center tap, in 0 -> out 0
    w.at(1, 1, 1) = 1.0;
    Var wv = constant(w);
    Tensor y = conv1d(x, wv, nullptr, 1).value();
    for (int64_t i = 0; i < y.numel(); ++i) CHECK(y[i] == doctest::Approx(x.value()[i]));
  }

  SUBCASE("gradients, dilation 1 and 2") {
    for (int64_t dil : {1, 2}) {
      Var x = rand_param({2, 7, 3}, rng);
      Var w = rand_param({3, 3, 4}, rng);
      Var b = rand_param({4}, rng);
      auto loss = [&] { return sum_all(square(conv1d(x, w, &b, dil))); };
      CHECK(max_grad_rel_error(loss, {x, w, b}) < 1e-7);
    }
  }

  SUBCASE("zero padding at boundaries") {
    Var x = param(Tensor::full({1, 3, 1}, 1.0));
    Var w = constant(Tensor::full({3, 1, 1}, 1.0));
    Tensor y = conv1d(x, w, nullptr, 1).value();
    CHECK(y[0] == doctest::Approx(2.0));  // left edge sees zero pad
    CHECK(y[1] == doctest::Approx(3.0));
    CHECK(y[2] == doctest::Approx(2.0));
  }

  SUBCASE("shape contract") {
    Var x = rand_param({1, 5, 2}, rng);
    Var w = rand_param({3, 3, 4}, rng);  // expects Cin=3
    CHECK_THROWS_AS(conv1d(x, w, nullptr, 1), ContractError);
  }
}

TEST_CASE("conv2d: strided values and gradients") {
  Rng rng(15);
  Var x = rand_param({2, 3, 6, 5}, rng);
  Var w = rand_param({3, 3, 3, 4}, rng);
  Var b = rand_param({4}, rng);

  SUBCASE("stride 1 preserves spatial dims") {
    Tensor y = conv2d(x, w, &b, 1, 1).value();
    CHECK(y.dim(2) == 6);
    CHECK(y.dim(3) == 5);
  }
  SUBCASE("stride 2 halves dims (rounded up)") {
    Tensor y = conv2d(x, w, &b, 2, 2).value();
    CHECK(y.dim(2) == 3);
    CHECK(y.dim(3) == 3);
  }
  SUBCASE("gradients stride 1") {
    auto loss = [&] { return sum_all(square(conv2d(x, w, &b, 1, 1))); };
    CHECK(max_grad_rel_error(loss, {x, w, b}) < 1e-6);
  }
  SUBCASE("gradients stride (1,2)") {
    auto loss = [&] { return sum_all(square(conv2d(x, w, &b, 1, 2))); };
    CHECK(max_grad_rel_error(loss, {x, w, b}) < 1e-6);
  }
}

TEST_CASE("normalization ops") {
  Rng rng(16);
  Var x = rand_param({3, 7}, rng, 2.0);

  SUBCASE("layer_norm_plain statistics") {
    Tensor y = layer_norm_plain(x).value();
    for (int64_t r = 0; r < 3; ++r) {
      double mu = 0.0, var = 0.0;
      for (int64_t j = 0; j < 7; ++j) mu += y.at(r, j);
      mu /= 7.0;
      for (int64_t j = 0; j < 7; ++j) var += (y.at(r, j) - mu) * (y.at(r, j) - mu);
      var /= 7.0;
      CHECK(std::abs(mu) < 1e-12);
      CHECK(var == doctest::Approx(1.0).epsilon(1e-4));
    }
  }
  SUBCASE("layer_norm_plain gradient") {
    auto loss = [&] { return sum_all(square(add_scalar(layer_norm_plain(x), 0.3))); };
    CHECK(max_grad_rel_error(loss, {x}) < 1e-6);
  }
  SUBCASE("affine layer_norm gradient") {
    Var g = rand_param({7}, rng);
    Var b = rand_param({7}, rng);
    auto loss = [&] { return sum_all(square(layer_norm(x, g, b))); };
    CHECK(max_grad_rel_error(loss, {x, g, b}) < 1e-6);
  }
  SUBCASE("softmax rows sum to one; gradient") {
    Tensor y = softmax_lastdim(x).value();
    for (int64_t r = 0; r < 3; ++r) {
      double s = 0.0;
      for (int64_t j = 0; j < 7; ++j) s += y.at(r, j);
      CHECK(s == doctest::Approx(1.0));
    }
    auto loss = [&] { return sum_all(mul(softmax_lastdim(x), x)); };
    CHECK(max_grad_rel_error(loss, {x}) < 1e-6);
  }
  SUBCASE("log_softmax gradient") {
    Var y = rand_param({7, 3}, rng);
    auto loss = [&] { return neg_mean_diag(matmul(log_softmax_lastdim(x), y)); };
    CHECK(max_grad_rel_error(loss, {x, y}) < 1e-6);
  }
  SUBCASE("l2_normalize_rows produces unit rows; gradient") {
    Tensor y = l2_normalize_rows(x).value();
    for (int64_t r = 0; r < 3; ++r) {
      double n = 0.0;
      for (int64_t j = 0; j < 7; ++j) n += y.at(r, j) * y.at(r, j);
      CHECK(n == doctest::Approx(1.0));
    }
    Var t = rand_param({3, 7}, rng);
    auto loss = [&] { return sum_all(mul(l2_normalize_rows(x), t)); };
    CHECK(max_grad_rel_error(loss, {x, t}) < 1e-6);
  }
}

TEST_CASE("multihead attention") {
  Rng rng(17);
  Var q = rand_param({2, 5, 8}, rng);
  Var k = rand_param({2, 5, 8}, rng);
  Var v = rand_param({2, 5, 8}, rng);

  SUBCASE("gradient, 2 heads") {
    auto loss = [&] { return sum_all(square(multihead_attention(q, k, v, 2))); };
    CHECK(max_grad_rel_error(loss, {q, k, v}) < 1e-6);
  }
  SUBCASE("key mask removes influence of masked frames") {
    Tensor mask({2, 5}, 1.0);
    mask.at(0, 4) = 0.0;
    Tensor y1 = multihead_attention(q, k, v, 2, &mask).value();
    // perturb k and v at the masked frame; output must be unchanged
    Tensor k2 = k.value(), v2 = v.value();
    for (int64_t j = 0; j < 8; ++j) {
      k2.at(0, 4, j) += 3.0;
      v2.at(0, 4, j) -= 2.0;
    }
    Tensor y2 = multihead_attention(constant(k2), constant(k2), constant(v2), 2, &mask).value();
    (void)y2;
    Tensor y3 = multihead_attention(q, constant(k2), constant(v2), 2, &mask).value();
    for (int64_t b = 0; b < 1; ++b)
      for (int64_t l = 0; l < 5; ++l)
        for (int64_t j = 0; j < 8; ++j) CHECK(y3.at(b, l, j) == doctest::Approx(y1.at(b, l, j)));
  }
  SUBCASE("masked gradient") {
    Tensor mask({2, 5}, 1.0);
    mask.at(1, 0) = 0.0;
    auto loss = [&] { return sum_all(square(multihead_attention(q, k, v, 2, &mask))); };
    CHECK(max_grad_rel_error(loss, {q, k, v}) < 1e-6);
  }
}

TEST_CASE("indexing ops") {
  Rng rng(18);

  SUBCASE("embedding lookup and scatter gradient") {
    Var table = rand_param({5, 3}, rng);
    std::vector<int64_t> ids{1, 4, 1};
    auto loss = [&] { return sum_all(square(embedding(table, ids))); };
    CHECK(max_grad_rel_error(loss, {table}) < 1e-7);
    CHECK_THROWS_AS(embedding(table, {5}), ContractError);
  }
  SUBCASE("gather_rows") {
    Var x = rand_param({6, 4}, rng);
    std::vector<int64_t> idx{0, 3, 3, 5};
    Tensor y = gather_rows(x, idx).value();
    CHECK(y.dim(0) == 4);
    for (int64_t j = 0; j < 4; ++j) CHECK(y.at(1, j) == x.value().at(3, j));
    auto loss = [&] { return sum_all(square(gather_rows(x, idx))); };
    CHECK(max_grad_rel_error(loss, {x}) < 1e-7);
  }
  SUBCASE("repeat_rows gradient sums over repeats") {
    Var x = rand_param({3, 2}, rng);
    std::vector<int64_t> dur{2, 0, 3};
    Tensor y = repeat_rows(x, dur).value();
    CHECK(y.dim(0) == 5);
    auto loss = [&] { return sum_all(square(repeat_rows(x, dur))); };
    CHECK(max_grad_rel_error(loss, {x}) < 1e-7);
  }
  SUBCASE("concat_rows") {
    Var a = rand_param({2, 3}, rng);
    Var b = rand_param({4, 3}, rng);
    auto loss = [&] { return sum_all(square(concat_rows(a, b))); };
    CHECK(max_grad_rel_error(loss, {a, b}) < 1e-7);
  }
  SUBCASE("reshape round trip") {
    Var x = rand_param({2, 6}, rng);
    auto loss = [&] { return sum_all(square(reshape(x, {3, 4}))); };
    CHECK(max_grad_rel_error(loss, {x}) < 1e-7);
  }
}

TEST_CASE("reductions") {
  Rng rng(19);
  Var x = rand_param({2, 4, 3}, rng);

  SUBCASE("masked_mean value and gradient") {
    Tensor mask({2, 4}, 1.0);
    mask.at(0, 3) = 0.0;
    mask.at(1, 0) = 0.0;
    double expect = 0.0;
    int64_t n = 0;
    for (int64_t b = 0; b < 2; ++b)
      for (int64_t l = 0; l < 4; ++l)
        if (mask.at(b, l) != 0.0)
          for (int64_t c = 0; c < 3; ++c) {
            expect += x.value().at(b, l, c);
            ++n;
          }
    expect /= static_cast<double>(n);
    CHECK(masked_mean(x, mask).value()[0] == doctest::Approx(expect));
    auto loss = [&] { return masked_mean(square(x), mask); };
    CHECK(max_grad_rel_error(loss, {x}) < 1e-7);
    Tensor empty({2, 4}, 0.0);
    CHECK_THROWS_AS(masked_mean(x, empty), ContractError);
  }
  SUBCASE("global_avg_pool2d and scale_channels") {
    Var y = rand_param({2, 3, 4, 5}, rng);
    Var gate = rand_param({2, 3}, rng);
    auto loss = [&] { return sum_all(square(scale_channels(y, sigmoid(gate)))); };
    CHECK(max_grad_rel_error(loss, {y, gate}) < 1e-6);
    auto loss2 = [&] { return sum_all(square(global_avg_pool2d(y))); };
    CHECK(max_grad_rel_error(loss2, {y}) < 1e-7);
  }
}

TEST_CASE("graph mechanics") {
  Rng rng(20);

  SUBCASE("grad accumulates across shared subexpressions") {
    Var x = param(Tensor::from_vector({2.0}));
    Var y = add(mul(x, x), mul_scalar(x, 3.0));  // x^2 + 3x, dy/dx = 2x + 3 = 7
    backward(sum_all(y));
    CHECK(x.grad()[0] == doctest::Approx(7.0));
  }
  SUBCASE("NoGradGuard detaches results") {
    Var x = rand_param({2, 2}, rng);
    {
      NoGradGuard ng;
      Var y = mul(x, x);
      CHECK_FALSE(y.requires_grad());
      CHECK(y.node()->parents.empty());
    }
    Var z = mul(x, x);
    CHECK(z.requires_grad());
  }
  SUBCASE("detach blocks gradient") {
    Var x = param(Tensor::from_vector({3.0}));
    Var y = mul(detach(x), x);  // treated as c*x
    backward(sum_all(y));
    CHECK(x.grad()[0] == doctest::Approx(3.0));
  }
  SUBCASE("backward twice re-zeroes gradients") {
    Var x = param(Tensor::from_vector({1.5}));
    Var loss = sum_all(square(x));
    backward(loss);
    backward(loss);
    CHECK(x.grad()[0] == doctest::Approx(3.0));
  }
  SUBCASE("backward requires scalar root") {
    Var x = rand_param({2, 2}, rng);
    CHECK_THROWS_AS(backward(mul(x, x)), ContractError);
  }
}

// Copyright 2026 The diffts Authors
// SPDX-License-Identifier: Apache-2.0

#include "dts/tensor.hpp"

#include "doctest.h"
#include "dts/error.hpp"

using namespace dts;

TEST_CASE("tensor shape and accessors") {
  Tensor t({2, 3}, 0.0);
  CHECK(t.numel() == 6);
  t.at(1, 2) = 5.0;
  CHECK(t[5] == 5.0);
  Tensor u({2, 3, 4});
  u.at(1, 2, 3) = 7.0;
  CHECK(u[1 * 12 + 2 * 4 + 3] == 7.0);
}

TEST_CASE("tensor arithmetic and reductions") {
  Tensor a({4}, 2.0), b({4}, 3.0);
  Tensor c = a + b;
  CHECK(c.sum() == doctest::Approx(20.0));
  CHECK((a * b).mean() == doctest::Approx(6.0));
  CHECK((a - b).min() == doctest::Approx(-1.0));
  CHECK((a * 2.0).max() == doctest::Approx(4.0));
  CHECK_THROWS_AS(a + Tensor({3}, 0.0), ContractError);
}

TEST_CASE("reshape preserves data, rejects bad counts") {
  Rng rng(1);
  Tensor a = Tensor::randn({3, 4}, rng);
  Tensor b = a.reshaped({2, 6});
  CHECK(b.dim(0) == 2);
  CHECK(b[7] == a[7]);
  CHECK_THROWS_AS(a.reshaped({5, 5}), ContractError);
}

TEST_CASE("matmul2d matches hand computation") {
  Tensor a({2, 3});
  Tensor b({3, 2});
  for (int i = 0; i < 6; ++i) {
    a[i] = i + 1;       // [[1,2,3],[4,5,6]]
    b[i] = 7 + i;       // [[7,8],[9,10],[11,12]]
  }
  Tensor c = matmul2d(a, b);
  CHECK(c.at(0, 0) == doctest::Approx(58.0));
  CHECK(c.at(0, 1) == doctest::Approx(64.0));
  CHECK(c.at(1, 0) == doctest::Approx(139.0));
  CHECK(c.at(1, 1) == doctest::Approx(154.0));
}

TEST_CASE("randn moments are sane") {
  Rng rng(42);
  Tensor t = Tensor::randn({100000}, rng);
  CHECK(std::abs(t.mean()) < 0.02);
  double var = 0.0;
  for (int64_t i = 0; i < t.numel(); ++i) var += t[i] * t[i];
  var /= static_cast<double>(t.numel());
  CHECK(var == doctest::Approx(1.0).epsilon(0.02));
  CHECK(t.all_finite());
}

TEST_CASE("rng determinism and stream splitting") {
  Rng a(7), b(7);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  Rng parent(3);
  Rng c1 = parent.split(0), c2 = parent.split(1);
  CHECK(c1.next_u64() != c2.next_u64());
  // splitting does not consume parent state
  Rng parent2(3);
  CHECK(parent.next_u64() == parent2.next_u64());
}

TEST_CASE("uniform_int covers inclusive bounds") {
  Rng rng(9);
  bool lo_seen = false, hi_seen = false;
  for (int i = 0; i < 2000; ++i) {
    int64_t v = rng.uniform_int(1, 5);
    CHECK(v >= 1);
    CHECK(v <= 5);
    lo_seen |= v == 1;
    hi_seen |= v == 5;
  }
  CHECK(lo_seen);
  CHECK(hi_seen);
}

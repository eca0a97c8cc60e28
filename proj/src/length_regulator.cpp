// Copyright 2026 The diffts Authors
// SPDX-License-Identifier: Apache-2.0

#include "dts/length_regulator.hpp"

#include <cstring>
#include <string>

#include "dts/error.hpp"

namespace dts {

int64_t total_duration(const std::vector<int64_t>& durations) {
  int64_t total = 0;
  for (int64_t d : durations) {
    check_contract(d >= 0, "duration must be non-negative, got " + std::to_string(d));
    total += d;
  }
  return total;
}

Tensor expand_by_durations(const Tensor& seq, const std::vector<int64_t>& durations) {
  check_contract(seq.rank() == 2, "expand_by_durations: seq must be (K,C), got " + shape_str(seq.shape()));
  check_contract(seq.dim(0) == static_cast<int64_t>(durations.size()),
                 "expand_by_durations: " + std::to_string(seq.dim(0)) + " elements vs " +
                     std::to_string(durations.size()) + " durations");
  const int64_t c = seq.dim(1);
  Tensor out({total_duration(durations), c});
  int64_t row = 0;
  for (size_t i = 0; i < durations.size(); ++i)
    for (int64_t r = 0; r < durations[i]; ++r, ++row)
      std::memcpy(out.data() + row * c, seq.data() + static_cast<int64_t>(i) * c,
                  sizeof(double) * static_cast<size_t>(c));
  return out;
}

}  // namespace dts

// Copyright 2026 The diffts Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "dts/tensor.hpp"

namespace dts {

// Deterministic phoneme-rate -> frame-rate upsampling: row i of seq is
// repeated durations[i] times, in order. Zero durations are legal and drop
// the element (rounded predicted durations can reach 0 before clamping, which
// happens in the pipeline). Pure function; rows are copied bit-identically.
Tensor expand_by_durations(const Tensor& seq, const std::vector<int64_t>& durations);

int64_t total_duration(const std::vector<int64_t>& durations);

}  // namespace dts

// Copyright 2026 The specdiff-lab Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>

namespace specdiff {

struct ModelConfig {
  std::size_t n_layers = 4;
  std::size_t n_heads = 4;
  std::size_t d_model = 64;
  std::size_t d_ff = 256;
  std::size_t n_tokens = 64;  // side * side grid
  std::uint64_t seed = 42;
  // Multiplier on the query/key init range.
  float qk_gain = 4.0f;

  /// Throws ErrorCode::kConfiguration on violated invariants.
  void validate() const;

  std::size_t grid_side() const;
  std::size_t head_dim() const { return d_model / n_heads; }
};

}  // namespace specdiff

// Copyright 2026 The specdiff-lab Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "specdiff/model_config.hpp"

namespace specdiff {

/// Multiply-add counts for the transformer blocks, split by GEMM category.
struct FlopCounts {
  std::uint64_t qkv = 0;
  std::uint64_t attn_scores = 0;
  std::uint64_t attn_values = 0;
  std::uint64_t out_proj = 0;
  std::uint64_t ffn = 0;

  std::uint64_t total() const { return qkv + attn_scores + attn_values + out_proj + ffn; }

  FlopCounts& operator+=(const FlopCounts& other);
  friend bool operator==(const FlopCounts&, const FlopCounts&) = default;
};

/// Cost of one forward pass where `n_queries` tokens are recomputed. The key
/// side of attention always spans every token:
///   n_layers * (4*m*d^2 + 2*m*n*d + 2*m*d*d_ff)   with m = n_queries.
/// Embedding and the final projection are not counted.
FlopCounts step_flops(const ModelConfig& config, std::size_t n_queries);

/// Dense step: step_flops with every token as a query.
FlopCounts dense_step_flops(const ModelConfig& config);

class FlopLedger {
 public:
  void add_step(const FlopCounts& counts) { per_step_.push_back(counts); }
  void add_speculation(std::uint64_t flops) { speculation_ += flops; }

  const std::vector<FlopCounts>& per_step() const { return per_step_; }
  std::uint64_t speculation() const { return speculation_; }

  /// Per-category sums over all recorded steps (speculation excluded).
  FlopCounts by_category() const;
  /// Sum of per-step totals (speculation excluded).
  std::uint64_t total() const;
  std::uint64_t total_with_speculation() const { return total() + speculation_; }

 private:
  std::vector<FlopCounts> per_step_;
  std::uint64_t speculation_ = 0;
};

/// Dense FLOPs over cached FLOPs plus the speculation cost of the cached run.
double speedup_estimate(const FlopLedger& cached, const FlopLedger& dense);

struct ArithmeticIntensity {
  double workload_over_operands;  // M*N*K / (M*K + N*K)
  double standard;                // M*N*K / (M*N + N*K + M*K)
};

/// GEMM of an M x N input with an N x K weight.
ArithmeticIntensity arithmetic_intensity(double m, double n, double k);

}  // namespace specdiff

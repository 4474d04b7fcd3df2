// Copyright 2026 The specdiff-lab Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#include "specdiff/flops.hpp"

#include "specdiff/error.hpp"

namespace specdiff {

FlopCounts& FlopCounts::operator+=(const FlopCounts& other) {
  qkv += other.qkv;
  attn_scores += other.attn_scores;
  attn_values += other.attn_values;
  out_proj += other.out_proj;
  ffn += other.ffn;
  return *this;
}

FlopCounts step_flops(const ModelConfig& config, std::size_t n_queries) {
  const std::uint64_t layers = config.n_layers;
  const std::uint64_t m = n_queries;
  const std::uint64_t n = config.n_tokens;
  const std::uint64_t d = config.d_model;
  const std::uint64_t ff = config.d_ff;
  FlopCounts counts;
  counts.qkv = layers * 3 * m * d * d;
  counts.attn_scores = layers * m * n * d;
  counts.attn_values = layers * m * n * d;
  counts.out_proj = layers * m * d * d;
  counts.ffn = layers * 2 * m * d * ff;
  return counts;
}

FlopCounts dense_step_flops(const ModelConfig& config) {
  return step_flops(config, config.n_tokens);
}

FlopCounts FlopLedger::by_category() const {
  FlopCounts sum;
  for (const auto& step : per_step_) sum += step;
  return sum;
}

std::uint64_t FlopLedger::total() const {
  std::uint64_t sum = 0;
  for (const auto& step : per_step_) sum += step.total();
  return sum;
}

double speedup_estimate(const FlopLedger& cached, const FlopLedger& dense) {
  const auto denominator = cached.total_with_speculation();
  require(denominator > 0, ErrorCode::kInvalidArgument, "speedup_estimate: cached ledger is empty");
  return static_cast<double>(dense.total()) / static_cast<double>(denominator);
}

ArithmeticIntensity arithmetic_intensity(double m, double n, double k) {
  require(m > 0 && n > 0 && k > 0, ErrorCode::kInvalidArgument,
          "arithmetic_intensity: dimensions must be positive");
  const double work = m * n * k;
  return {work / (m * k + n * k), work / (m * n + n * k + m * k)};
}

}  // namespace specdiff

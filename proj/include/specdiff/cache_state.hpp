// Copyright 2026 The specdiff-lab Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "specdiff/model_config.hpp"
#include "specdiff/toy_dit.hpp"
#include "specdiff/trace.hpp"

namespace specdiff {

inline constexpr std::size_t kHistoryCapacity = 3;

struct HistoryEntry {
  std::vector<float> output;
  double timestep = 0.0;
};

/// Last computed outputs of one token, most recent first.
class FeatureHistory {
 public:
  void push(std::span<const float> output, double timestep);

  bool empty() const { return entries_.empty(); }
  std::size_t size() const { return entries_.size(); }
  const HistoryEntry& operator[](std::size_t i) const { return entries_[i]; }
  const HistoryEntry& latest() const { return entries_.front(); }

 private:
  std::vector<HistoryEntry> entries_;
};

struct TokenPartition {
  std::vector<TokenId> c1;  // recomputed
  std::vector<TokenId> c2;  // reuse last output
  std::vector<TokenId> c3;  // weighted approximation

  /// Throws ErrorCode::kCacheIntegrity unless the classes are disjoint,
  /// in range and cover all `n_tokens`.
  void validate(std::size_t n_tokens) const;
};

struct CacheState {
  std::vector<std::uint32_t> cf;  // consecutive cached steps per token
  std::vector<FeatureHistory> history;
  KvSnapshots kv;
  std::vector<std::uint32_t> selection_counts;  // lifetime computed count

  static CacheState create(const ModelConfig& config);
};

/// cf reset for C1 and incremented for C2/C3; C1 fresh outputs pushed into
/// history. `fresh_tokens` must equal partition.c1 exactly.
void update_cache_state(CacheState& state, const TokenPartition& partition,
                        std::span<const TokenId> fresh_tokens, const Matrix& fresh_outputs,
                        double timestep);

}  // namespace specdiff

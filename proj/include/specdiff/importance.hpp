// Copyright 2026 The specdiff-lab Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "specdiff/trace.hpp"

namespace specdiff {

/// Knobs shared by every score-driven caching policy.
struct PolicyConfig {
  double cached_ratio = 0.0;          // CR in [0, 1); fraction of tokens not recomputed
  std::size_t speculation_steps = 2;  // S of the speculative pre-run
  double c2_mass = 0.10;              // score mass budget for direct reuse
  std::size_t warmup_steps = 1;       // leading dense iterations
  bool starvation_enabled = true;
  std::size_t history_window = 3;     // feature-history depth for approximation
  bool classify_tokens = true;        // off: every cached token is reused directly
  bool approximate = true;            // off: approximated tokens fall back to reuse

  void validate() const;
};

/// Per-token importance terms. score = his * fut * star.
struct ImportanceRecord {
  std::vector<double> his;
  std::vector<double> fut;
  std::vector<double> star;
  std::vector<double> score;

  std::size_t size() const { return score.size(); }
};

/// Sum over layers of the attention received by each token.
std::vector<double> attention_received(std::span<const std::vector<float>> layers);
std::vector<double> attention_received(const AttentionTrace& trace);

/// his for iteration `step`: attention received in iteration step - 1.
std::vector<double> historical_score(const TraceArchive& archive, std::size_t step);

/// fut: scores of the table entry nearest `current_timestep`; ties go to the
/// larger (noisier) timestep.
std::vector<double> future_score(const SpeculativeScoreTable& table, double current_timestep);

/// Index into `table.entries` used by future_score.
std::size_t nearest_entry(const SpeculativeScoreTable& table, double current_timestep);

/// star = e^cf per token, or all ones when disabled.
std::vector<double> starvation_score(std::span<const std::uint32_t> cache_counts, bool enabled = true);

ImportanceRecord combined_score(std::vector<double> his, std::vector<double> fut,
                                std::vector<double> star);

/// max(1, ceil((1 - CR) * n)).
std::size_t compute_set_size(double cached_ratio, std::size_t n_tokens);

/// Highest-score tokens, ties by lower id. Returned ascending by id.
std::vector<TokenId> select_compute_set(std::span<const double> scores, double cached_ratio);

/// Token ids ordered by descending score, ties by ascending id.
std::vector<TokenId> rank_descending(std::span<const double> scores);

}  // namespace specdiff

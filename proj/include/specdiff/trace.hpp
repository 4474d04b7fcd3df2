// Copyright 2026 The specdiff-lab Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "specdiff/matrix.hpp"

namespace specdiff {

using TokenId = std::uint32_t;

/// Attention mass received per token at each layer during one forward pass.
/// `received` is n_layers x n_tokens; `computed` flags the query tokens.
struct AttentionTrace {
  Matrix received;
  std::vector<std::uint8_t> computed;

  std::size_t n_layers() const { return received.rows(); }
  std::size_t n_tokens() const { return received.cols(); }
  std::size_t query_count() const;
};

struct SpeculativeEntry {
  float timestep = 0.0f;
  std::vector<float> scores;  // attention received, summed over layers
};

/// Future-importance lookup built by the speculative pre-run.
struct SpeculativeScoreTable {
  std::vector<SpeculativeEntry> entries;  // strictly decreasing timesteps
  std::uint64_t flops = 0;                // multiply-adds spent on the pre-run

  std::size_t steps() const { return entries.size(); }
  bool empty() const { return entries.empty(); }
};

struct StepRecord {
  std::uint32_t step = 0;
  float timestep = 0.0f;
  AttentionTrace trace;
  Matrix outputs;  // n_tokens x d_model velocity actually used for the Euler update
};

/// In-memory image of the SPDT trace file. Every metric consumes this type,
/// so live and replayed numbers come from the same float data.
struct TraceArchive {
  std::uint32_t n_layers = 0;
  std::uint32_t n_tokens = 0;
  std::uint32_t d_model = 0;
  std::vector<float> schedule;  // n_steps + 1 values
  std::vector<StepRecord> steps;
  Matrix final_latent;  // n_tokens x d_model
  std::optional<SpeculativeScoreTable> speculation;

  std::uint32_t n_steps() const { return static_cast<std::uint32_t>(steps.size()); }
};

}  // namespace specdiff

// Copyright 2026 The specdiff-lab Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <vector>

#include "specdiff/baselines.hpp"
#include "specdiff/cache_state.hpp"
#include "specdiff/flops.hpp"
#include "specdiff/importance.hpp"
#include "specdiff/toy_dit.hpp"

namespace specdiff {

/// Splits non-C1 tokens: the ascending-score prefix whose cumulative score
/// stays within c2_mass of the total score over all tokens is reused (C2);
/// the rest is approximated (C3). Ties enter C2 by lower id.
TokenPartition classify(std::span<const double> scores, std::vector<TokenId> c1, double c2_mass);

/// Weights over history i = 1..h for iteration k, proportional to
/// e^-i * (T_{k-i} - T_k) and normalized to one.
std::vector<double> approx_weights(const TimestepSchedule& schedule, std::size_t k, std::size_t h);

/// Same weighting using the timesteps the history was actually recorded at
/// (most recent first).
std::vector<double> approx_weights_at(std::span<const double> history_timesteps,
                                      double current_timestep);

/// Weighted sum of the stored outputs, weight i applied to history entry i.
std::vector<float> approximate_features(const FeatureHistory& history,
                                        std::span<const double> weights);

/// The most recent stored output, unchanged.
std::span<const float> reuse_features(const FeatureHistory& history);

struct StepSummary {
  std::size_t step = 0;
  bool dense = false;
  std::size_t c1 = 0, c2 = 0, c3 = 0;
};

struct CachedSampleResult {
  LatentState final_state;
  TraceArchive archive;
  FlopLedger ledger;
  std::vector<StepSummary> steps;
  std::vector<TokenPartition> partitions;  // one per step
  std::vector<ImportanceRecord> scores;    // empty record on unscored steps
  CacheState state;
};

/// Cached Euler sampling. `spec_table` is required by the specdiff policy
/// and ignored otherwise; its cost is charged to the ledger.
CachedSampleResult cached_sample(const ToyDiTModel& model, const LatentState& init_noise,
                                 const TimestepSchedule& schedule, const Policy& policy,
                                 const SpeculativeScoreTable* spec_table = nullptr);

}  // namespace specdiff

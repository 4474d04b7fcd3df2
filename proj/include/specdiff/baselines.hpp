// Copyright 2026 The specdiff-lab Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "specdiff/cache_state.hpp"
#include "specdiff/importance.hpp"

namespace specdiff {

enum class PolicyKind {
  kNone,
  kIntervalReuse,
  kHistoricalOnly,
  kRandom,
  kTaylorExtrapolate,
  kSpecDiff,
};

struct Policy {
  PolicyKind kind = PolicyKind::kSpecDiff;
  std::size_t period = 2;         // interval reuse only
  std::uint64_t random_seed = 0;  // random selection only
  PolicyConfig config;

  void validate() const;
  bool uses_scores() const;
  bool uses_speculation() const { return kind == PolicyKind::kSpecDiff; }
};

/// Key used on the command line and in config files.
std::string_view policy_key(PolicyKind kind);
PolicyKind parse_policy_kind(std::string_view key);

/// Human-facing label.
std::string display_name(const Policy& policy);

/// Interval reuse computes every token when step % period == 0.
bool interval_computes(std::size_t period, std::size_t step);

/// `count` distinct ids drawn uniformly, ascending.
std::vector<TokenId> random_compute_set(std::mt19937_64& rng, std::size_t n_tokens,
                                        std::size_t count);

/// First-order extrapolation from the two most recent history entries;
/// reuses the latest entry when fewer than two exist.
std::vector<float> taylor_extrapolate(const FeatureHistory& history, double timestep);

}  // namespace specdiff

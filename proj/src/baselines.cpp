// Copyright 2026 The specdiff-lab Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#include "specdiff/baselines.hpp"

#include <algorithm>
#include <numeric>

#include "specdiff/error.hpp"

namespace specdiff {

void Policy::validate() const {
  config.validate();
  if (kind == PolicyKind::kIntervalReuse) {
    require(period >= 1, ErrorCode::kConfiguration, "interval_reuse: period must be >= 1");
  }
}

bool Policy::uses_scores() const {
  return kind == PolicyKind::kHistoricalOnly || kind == PolicyKind::kTaylorExtrapolate ||
         kind == PolicyKind::kSpecDiff;
}

std::string_view policy_key(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::kNone: return "none";
    case PolicyKind::kIntervalReuse: return "interval_reuse";
    case PolicyKind::kHistoricalOnly: return "historical_only";
    case PolicyKind::kRandom: return "random";
    case PolicyKind::kTaylorExtrapolate: return "taylor_extrapolate";
    case PolicyKind::kSpecDiff: return "specdiff";
  }
  return "unknown";
}

PolicyKind parse_policy_kind(std::string_view key) {
  for (auto kind : {PolicyKind::kNone, PolicyKind::kIntervalReuse, PolicyKind::kHistoricalOnly,
                    PolicyKind::kRandom, PolicyKind::kTaylorExtrapolate, PolicyKind::kSpecDiff}) {
    if (policy_key(kind) == key) return kind;
  }
  fail(ErrorCode::kConfiguration, "unknown policy '" + std::string(key) + "'");
}

std::string display_name(const Policy& policy) {
  switch (policy.kind) {
    case PolicyKind::kNone: return "dense";
    case PolicyKind::kIntervalReuse:
      return "FORA-like interval reuse (period " + std::to_string(policy.period) + ")";
    case PolicyKind::kHistoricalOnly: return "ToCa/RAS-like historical selection";
    case PolicyKind::kRandom: return "random selection";
    case PolicyKind::kTaylorExtrapolate: return "TaylorSeer-like first-order extrapolation";
    case PolicyKind::kSpecDiff: return "specdiff";
  }
  return "unknown";
}

bool interval_computes(std::size_t period, std::size_t step) {
  require(period >= 1, ErrorCode::kConfiguration, "interval_reuse: period must be >= 1");
  return step % period == 0;
}

std::vector<TokenId> random_compute_set(std::mt19937_64& rng, std::size_t n_tokens,
                                        std::size_t count) {
  require(count <= n_tokens, ErrorCode::kInvalidArgument, "random_compute_set: count exceeds n");
  std::vector<TokenId> ids(n_tokens);
  std::iota(ids.begin(), ids.end(), TokenId{0});
  // Partial Fisher-Yates.
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng() % (n_tokens - i));
    std::swap(ids[i], ids[j]);
  }
  ids.resize(count);
  std::sort(ids.begin(), ids.end());
  return ids;
}

std::vector<float> taylor_extrapolate(const FeatureHistory& history, double timestep) {
  require(!history.empty(), ErrorCode::kCacheIntegrity, "taylor_extrapolate: empty history");
  const auto& last = history[0];
  if (history.size() < 2) return last.output;
  const auto& prev = history[1];
  const double span = last.timestep - prev.timestep;
  require(span != 0.0, ErrorCode::kCacheIntegrity,
          "taylor_extrapolate: history entries share a timestep");
  const double ratio = (timestep - last.timestep) / span;
  std::vector<float> out(last.output.size());
  for (std::size_t c = 0; c < out.size(); ++c) {
    const double f1 = last.output[c];
    const double f2 = prev.output[c];
    out[c] = static_cast<float>(f1 + (f1 - f2) * ratio);
  }
  return out;
}

}  // namespace specdiff

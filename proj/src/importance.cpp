// Copyright 2026 The specdiff-lab Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#include "specdiff/importance.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "specdiff/error.hpp"

namespace specdiff {

void PolicyConfig::validate() const {
  require(std::isfinite(cached_ratio) && cached_ratio >= 0.0 && cached_ratio < 1.0,
          ErrorCode::kConfiguration, "policy: cached ratio must lie in [0, 1)");
  require(std::isfinite(c2_mass) && c2_mass > 0.0 && c2_mass < 1.0, ErrorCode::kConfiguration,
          "policy: c2_mass must lie in (0, 1)");
  require(speculation_steps >= 1, ErrorCode::kConfiguration, "policy: speculation steps must be >= 1");
  require(warmup_steps >= 1, ErrorCode::kConfiguration, "policy: warmup steps must be >= 1");
  require(history_window >= 1 && history_window <= 3, ErrorCode::kConfiguration,
          "policy: history window must be 1, 2 or 3");
}

std::vector<double> attention_received(std::span<const std::vector<float>> layers) {
  if (layers.empty()) return {};
  const std::size_t n = layers.front().size();
  std::vector<double> sum(n, 0.0);
  for (std::size_t l = 0; l < layers.size(); ++l) {
    require(layers[l].size() == n, ErrorCode::kTraceFormat,
            "attention_received: layer " + std::to_string(l) + " has " +
                std::to_string(layers[l].size()) + " scores, expected " + std::to_string(n));
    for (std::size_t t = 0; t < n; ++t) sum[t] += layers[l][t];
  }
  return sum;
}

std::vector<double> attention_received(const AttentionTrace& trace) {
  const auto& m = trace.received;
  require(trace.computed.empty() || trace.computed.size() == m.cols(), ErrorCode::kTraceFormat,
          "attention_received: query bitmap length differs from token count");
  std::vector<double> sum(m.cols(), 0.0);
  for (std::size_t l = 0; l < m.rows(); ++l) {
    const auto row = m.row(l);
    for (std::size_t t = 0; t < row.size(); ++t) sum[t] += row[t];
  }
  return sum;
}

std::vector<double> historical_score(const TraceArchive& archive, std::size_t step) {
  require(step >= 1, ErrorCode::kPrecondition,
          "historical_score: no previous iteration at step 0 (warmup computes every token)");
  require(step - 1 < archive.steps.size(), ErrorCode::kPrecondition,
          "historical_score: previous iteration " + std::to_string(step - 1) + " not recorded");
  return attention_received(archive.steps[step - 1].trace);
}

std::size_t nearest_entry(const SpeculativeScoreTable& table, double current_timestep) {
  require(!table.empty(), ErrorCode::kPrecondition, "future_score: speculative table is empty");
  std::size_t best = 0;
  double best_dist = std::abs(static_cast<double>(table.entries[0].timestep) - current_timestep);
  for (std::size_t i = 1; i < table.entries.size(); ++i) {
    const double t = table.entries[i].timestep;
    const double dist = std::abs(t - current_timestep);
    // Equal distance keeps the larger timestep.
    if (dist < best_dist ||
        (dist == best_dist && t > static_cast<double>(table.entries[best].timestep))) {
      best = i;
      best_dist = dist;
    }
  }
  return best;
}

std::vector<double> future_score(const SpeculativeScoreTable& table, double current_timestep) {
  const auto& entry = table.entries[nearest_entry(table, current_timestep)];
  return {entry.scores.begin(), entry.scores.end()};
}

std::vector<double> starvation_score(std::span<const std::uint32_t> cache_counts, bool enabled) {
  std::vector<double> star(cache_counts.size(), 1.0);
  if (!enabled) return star;
  for (std::size_t i = 0; i < cache_counts.size(); ++i) {
    star[i] = std::exp(static_cast<double>(cache_counts[i]));
  }
  return star;
}

ImportanceRecord combined_score(std::vector<double> his, std::vector<double> fut,
                                std::vector<double> star) {
  require(his.size() == fut.size() && his.size() == star.size(), ErrorCode::kInvalidArgument,
          "combined_score: his/fut/star lengths differ");
  ImportanceRecord record;
  record.score.resize(his.size());
  for (std::size_t i = 0; i < his.size(); ++i) {
    require(std::isfinite(his[i]) && his[i] >= 0.0 && std::isfinite(fut[i]) && fut[i] >= 0.0 &&
                std::isfinite(star[i]) && star[i] >= 1.0,
            ErrorCode::kInvalidArgument,
            "combined_score: invalid term at token " + std::to_string(i));
    record.score[i] = his[i] * fut[i] * star[i];
  }
  record.his = std::move(his);
  record.fut = std::move(fut);
  record.star = std::move(star);
  return record;
}

std::size_t compute_set_size(double cached_ratio, std::size_t n_tokens) {
  require(std::isfinite(cached_ratio) && cached_ratio >= 0.0 && cached_ratio < 1.0,
          ErrorCode::kConfiguration, "cached ratio must lie in [0, 1)");
  require(n_tokens >= 1, ErrorCode::kInvalidArgument, "compute_set_size: no tokens");
  // Epsilon absorbs representation error in (1 - CR).
  const double exact = (1.0 - cached_ratio) * static_cast<double>(n_tokens);
  const auto count = static_cast<std::size_t>(std::ceil(exact - 1e-9));
  return std::clamp<std::size_t>(count, 1, n_tokens);
}

std::vector<TokenId> rank_descending(std::span<const double> scores) {
  std::vector<TokenId> order(scores.size());
  std::iota(order.begin(), order.end(), TokenId{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](TokenId a, TokenId b) { return scores[a] > scores[b]; });
  return order;
}

std::vector<TokenId> select_compute_set(std::span<const double> scores, double cached_ratio) {
  const std::size_t count = compute_set_size(cached_ratio, scores.size());
  for (double s : scores) {
    require(!std::isnan(s), ErrorCode::kInvalidArgument, "select_compute_set: NaN score");
  }
  auto order = rank_descending(scores);
  order.resize(count);
  std::sort(order.begin(), order.end());
  return order;
}

}  // namespace specdiff

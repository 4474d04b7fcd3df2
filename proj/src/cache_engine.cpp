// Copyright 2026 The specdiff-lab Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#include "specdiff/cache_engine.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "specdiff/error.hpp"
#include "specdiff/speculation.hpp"

namespace specdiff {

void FeatureHistory::push(std::span<const float> output, double timestep) {
  entries_.insert(entries_.begin(), HistoryEntry{{output.begin(), output.end()}, timestep});
  if (entries_.size() > kHistoryCapacity) entries_.pop_back();
}

void TokenPartition::validate(std::size_t n_tokens) const {
  std::vector<std::uint8_t> seen(n_tokens, 0);
  for (const auto* cls : {&c1, &c2, &c3}) {
    for (TokenId t : *cls) {
      require(t < n_tokens, ErrorCode::kCacheIntegrity,
              "partition: token " + std::to_string(t) + " out of range");
      require(!seen[t], ErrorCode::kCacheIntegrity,
              "partition: token " + std::to_string(t) + " assigned twice");
      seen[t] = 1;
    }
  }
  require(c1.size() + c2.size() + c3.size() == n_tokens, ErrorCode::kCacheIntegrity,
          "partition: classes do not cover every token");
}

CacheState CacheState::create(const ModelConfig& config) {
  CacheState state;
  state.cf.assign(config.n_tokens, 0);
  state.history.resize(config.n_tokens);
  state.kv = KvSnapshots::empty(config);
  state.selection_counts.assign(config.n_tokens, 0);
  return state;
}

void update_cache_state(CacheState& state, const TokenPartition& partition,
                        std::span<const TokenId> fresh_tokens, const Matrix& fresh_outputs,
                        double timestep) {
  partition.validate(state.cf.size());
  require(fresh_tokens.size() == partition.c1.size() &&
              std::equal(fresh_tokens.begin(), fresh_tokens.end(), partition.c1.begin()),
          ErrorCode::kCacheIntegrity, "update_cache_state: fresh outputs do not match C1");
  require(fresh_outputs.rows() == fresh_tokens.size(), ErrorCode::kCacheIntegrity,
          "update_cache_state: output row count does not match C1");
  for (std::size_t i = 0; i < fresh_tokens.size(); ++i) {
    const TokenId t = fresh_tokens[i];
    state.cf[t] = 0;
    state.selection_counts[t] += 1;
    state.history[t].push(fresh_outputs.row(i), timestep);
  }
  for (TokenId t : partition.c2) state.cf[t] += 1;
  for (TokenId t : partition.c3) state.cf[t] += 1;
}

TokenPartition classify(std::span<const double> scores, std::vector<TokenId> c1, double c2_mass) {
  require(std::isfinite(c2_mass) && c2_mass > 0.0 && c2_mass < 1.0, ErrorCode::kConfiguration,
          "classify: c2_mass must lie in (0, 1)");
  const std::size_t n = scores.size();
  std::vector<std::uint8_t> computed(n, 0);
  for (TokenId t : c1) {
    require(t < n, ErrorCode::kInvalidArgument, "classify: C1 token out of range");
    computed[t] = 1;
  }

  std::vector<TokenId> rest;
  rest.reserve(n);
  for (std::size_t t = 0; t < n; ++t) {
    if (!computed[t]) rest.push_back(static_cast<TokenId>(t));
  }
  std::stable_sort(rest.begin(), rest.end(),
                   [&](TokenId a, TokenId b) { return scores[a] < scores[b]; });

  double total = 0.0;
  for (double s : scores) total += s;
  const double budget = c2_mass * total;

  TokenPartition partition;
  partition.c1 = std::move(c1);
  std::sort(partition.c1.begin(), partition.c1.end());
  double mass = 0.0;
  std::size_t prefix = 0;
  while (prefix < rest.size() && mass + scores[rest[prefix]] <= budget) {
    mass += scores[rest[prefix]];
    ++prefix;
  }
  partition.c2.assign(rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(prefix));
  partition.c3.assign(rest.begin() + static_cast<std::ptrdiff_t>(prefix), rest.end());
  std::sort(partition.c2.begin(), partition.c2.end());
  std::sort(partition.c3.begin(), partition.c3.end());
  return partition;
}

std::vector<double> approx_weights_at(std::span<const double> history_timesteps,
                                      double current_timestep) {
  require(!history_timesteps.empty(), ErrorCode::kPrecondition,
          "approx_weights: history length must be >= 1");
  std::vector<double> weights(history_timesteps.size());
  double sum = 0.0;
  double newer = current_timestep;
  for (std::size_t i = 0; i < history_timesteps.size(); ++i) {
    require(history_timesteps[i] > newer, ErrorCode::kSchedule,
            "approx_weights: timesteps must strictly increase going back in history");
    newer = history_timesteps[i];
    weights[i] = std::exp(-static_cast<double>(i + 1)) * (history_timesteps[i] - current_timestep);
    sum += weights[i];
  }
  for (auto& w : weights) w /= sum;
  return weights;
}

std::vector<double> approx_weights(const TimestepSchedule& schedule, std::size_t k, std::size_t h) {
  require(h >= 1, ErrorCode::kPrecondition, "approx_weights: history length must be >= 1");
  require(k >= h && k < schedule.timesteps.size(), ErrorCode::kPrecondition,
          "approx_weights: iteration " + std::to_string(k) + " has fewer than " +
              std::to_string(h) + " predecessors");
  std::vector<double> earlier(h);
  for (std::size_t i = 1; i <= h; ++i) earlier[i - 1] = schedule[k - i];
  return approx_weights_at(earlier, schedule[k]);
}

std::vector<float> approximate_features(const FeatureHistory& history,
                                        std::span<const double> weights) {
  require(!history.empty(), ErrorCode::kCacheIntegrity, "approximate_features: empty history");
  require(weights.size() == history.size(), ErrorCode::kInvalidArgument,
          "approximate_features: weight count does not match history length");
  const std::size_t width = history.latest().output.size();
  std::vector<double> acc(width, 0.0);
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const auto& out = history[i].output;
    for (std::size_t c = 0; c < width; ++c) acc[c] += weights[i] * out[c];
  }
  return {acc.begin(), acc.end()};
}

std::span<const float> reuse_features(const FeatureHistory& history) {
  require(!history.empty(), ErrorCode::kCacheIntegrity, "reuse_features: empty history");
  return history.latest().output;
}

namespace {

std::vector<TokenId> all_tokens(std::size_t n) {
  std::vector<TokenId> ids(n);
  std::iota(ids.begin(), ids.end(), TokenId{0});
  return ids;
}

void put_row(Matrix& m, TokenId t, std::span<const float> values) {
  std::copy(values.begin(), values.end(), m.row(t).begin());
}

// Velocity for a C3 token under the active policy.
std::vector<float> estimate_c3(const Policy& policy, const FeatureHistory& history,
                               double timestep) {
  if (policy.kind == PolicyKind::kTaylorExtrapolate) {
    return taylor_extrapolate(history, timestep);
  }
  if (!policy.config.approximate) {
    const auto latest = reuse_features(history);
    return {latest.begin(), latest.end()};
  }
  const std::size_t h = std::min(history.size(), policy.config.history_window);
  std::vector<double> times(h);
  for (std::size_t i = 0; i < h; ++i) times[i] = history[i].timestep;
  const auto weights = approx_weights_at(times, timestep);
  if (h == history.size()) return approximate_features(history, weights);
  // Window narrower than the stored history: pad with zero weights.
  std::vector<double> padded(history.size(), 0.0);
  std::copy(weights.begin(), weights.end(), padded.begin());
  return approximate_features(history, padded);
}

}  // namespace

CachedSampleResult cached_sample(const ToyDiTModel& model, const LatentState& init_noise,
                                 const TimestepSchedule& schedule, const Policy& policy,
                                 const SpeculativeScoreTable* spec_table) {
  policy.validate();
  validate_schedule(schedule);
  const auto& config = model.config();
  const std::size_t n = config.n_tokens;
  const auto& pc = policy.config;

  CachedSampleResult result;
  result.archive = make_archive_header(config, schedule);
  if (policy.uses_speculation()) {
    require(spec_table != nullptr && !spec_table->empty(), ErrorCode::kPrecondition,
            "cached_sample: specdiff policy needs a speculative score table");
    validate_table(*spec_table, n);
    result.ledger.add_speculation(spec_table->flops);
    result.archive.speculation = *spec_table;
  }

  result.state = CacheState::create(config);
  CacheState& state = result.state;
  std::mt19937_64 rng(policy.random_seed);
  result.final_state = init_noise;
  Matrix& x = result.final_state.tokens;
  check_finite(x, 0, "initial latent");

  for (std::size_t k = 0; k < schedule.n_steps(); ++k) {
    const double t_now = schedule[k];
    const bool dense = policy.kind == PolicyKind::kNone || k < pc.warmup_steps ||
                       (policy.kind == PolicyKind::kIntervalReuse && interval_computes(policy.period, k));

    TokenPartition partition;
    ImportanceRecord record;
    if (dense) {
      partition.c1 = all_tokens(n);
    } else if (policy.kind == PolicyKind::kIntervalReuse) {
      partition.c2 = all_tokens(n);
    } else if (policy.kind == PolicyKind::kRandom) {
      partition.c1 = random_compute_set(rng, n, compute_set_size(pc.cached_ratio, n));
      std::vector<std::uint8_t> chosen(n, 0);
      for (TokenId t : partition.c1) chosen[t] = 1;
      for (std::size_t t = 0; t < n; ++t) {
        if (!chosen[t]) partition.c2.push_back(static_cast<TokenId>(t));
      }
    } else {
      auto his = historical_score(result.archive, k);
      auto fut = policy.uses_speculation() ? future_score(*spec_table, t_now)
                                           : std::vector<double>(n, 1.0);
      auto star = starvation_score(state.cf, pc.starvation_enabled);
      record = combined_score(std::move(his), std::move(fut), std::move(star));
      auto c1 = select_compute_set(record.score, pc.cached_ratio);
      partition = classify(record.score, std::move(c1), pc.c2_mass);
      if (!pc.classify_tokens) {
        // Single-level ablation: every cached token is reused directly.
        partition.c2.insert(partition.c2.end(), partition.c3.begin(), partition.c3.end());
        partition.c3.clear();
        std::sort(partition.c2.begin(), partition.c2.end());
      }
    }
    partition.validate(n);

    Matrix velocity(n, config.d_model);
    StepRecord step;
    step.step = static_cast<std::uint32_t>(k);
    step.timestep = static_cast<float>(t_now);
    ForwardOutput fresh;
    if (!partition.c1.empty()) {
      fresh = forward(model, x, t_now, partition.c1, state.kv);
      check_finite(fresh.velocities, k, "velocity");
      result.ledger.add_step(step_flops(config, partition.c1.size()));
      for (std::size_t i = 0; i < fresh.tokens.size(); ++i) {
        put_row(velocity, fresh.tokens[i], fresh.velocities.row(i));
      }
      step.trace = fresh.trace;
    } else {
      result.ledger.add_step(FlopCounts{});
      step.trace.received = Matrix(config.n_layers, n);
      step.trace.computed.assign(n, 0);
    }
    for (TokenId t : partition.c2) put_row(velocity, t, reuse_features(state.history[t]));
    for (TokenId t : partition.c3) put_row(velocity, t, estimate_c3(policy, state.history[t], t_now));
    check_finite(velocity, k, "velocity");

    step.outputs = velocity;
    result.archive.steps.push_back(std::move(step));
    result.steps.push_back({k, dense, partition.c1.size(), partition.c2.size(), partition.c3.size()});

    update_cache_state(state, partition, fresh.tokens, fresh.velocities, t_now);
    result.partitions.push_back(std::move(partition));
    result.scores.push_back(std::move(record));

    euler_update(x, velocity, t_now, schedule[k + 1]);
    check_finite(x, k, "latent");
  }
  result.final_state.iteration = schedule.n_steps();
  result.final_state.timestep = schedule.timesteps.back();
  result.archive.final_latent = x;
  return result;
}

}  // namespace specdiff

// Copyright 2026 The specdiff-lab Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <random>

#include "doctest.h"
#include "specdiff/cache_engine.hpp"
#include "specdiff/speculation.hpp"
#include "test_support.hpp"

using namespace specdiff;
using namespace specdiff::testing;

namespace {

// Uniform-spacing weights evaluated directly: e^-i * i, normalized.
std::vector<double> uniform_weights_oracle(std::size_t h) {
  std::vector<double> w(h);
  double sum = 0.0;
  for (std::size_t i = 1; i <= h; ++i) sum += (w[i - 1] = std::exp(-static_cast<double>(i)) * i);
  for (auto& x : w) x /= sum;
  return w;
}

FeatureHistory history_of(std::initializer_list<std::pair<std::vector<float>, double>> newest_first) {
  FeatureHistory h;
  std::vector<std::pair<std::vector<float>, double>> items(newest_first);
  for (auto it = items.rbegin(); it != items.rend(); ++it) h.push(it->first, it->second);
  return h;
}

Policy policy(PolicyKind kind, double cr) {
  Policy p;
  p.kind = kind;
  p.config.cached_ratio = cr;
  return p;
}

}  // namespace

TEST_CASE("classify splits the ascending prefix within the mass budget") {
  const std::vector<double> s = {10, 5, 3, 1, 1};
  const auto p = classify(s, {0}, 0.10);
  CHECK(p.c1 == std::vector<TokenId>{0});
  CHECK(p.c2 == std::vector<TokenId>{3, 4});
  CHECK(p.c3 == std::vector<TokenId>{1, 2});

  const std::vector<double> zero_rest = {4, 0, 0, 0};
  const auto z = classify(zero_rest, {0}, 0.10);
  CHECK(z.c2 == std::vector<TokenId>{1, 2, 3});
  CHECK(z.c3.empty());

  const std::vector<double> heavy = {10, 5, 5, 5};
  const auto h = classify(heavy, {0}, 0.10);
  CHECK(h.c2.empty());
  CHECK(h.c3 == std::vector<TokenId>{1, 2, 3});

  // Equal scores enter C2 by lower id first: budget 0.1 * 12 = 1.2 admits one.
  const std::vector<double> tie = {9, 1, 1, 1};
  CHECK(classify(tie, {0}, 0.10).c2 == std::vector<TokenId>{1});

  CHECK(thrown_code([&] { classify(s, {0}, 0.0); }) == code_of(ErrorCode::kConfiguration));
  CHECK(thrown_code([&] { classify(s, {0}, 1.0); }) == code_of(ErrorCode::kConfiguration));
}

TEST_CASE("approximation weights") {
  const auto s = make_schedule(10);
  const auto w3 = approx_weights(s, 6, 3);
  const auto oracle = uniform_weights_oracle(3);
  for (std::size_t i = 0; i < 3; ++i) CHECK(w3[i] == doctest::Approx(oracle[i]).epsilon(1e-12));
  const double reference[] = {0.46685, 0.34351, 0.18964};
  for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(w3[i] - reference[i]) < 1e-4);
  CHECK(approx_weights(s, 4, 1) == std::vector<double>{1.0});
  for (std::size_t i = 0; i < 3; ++i) CHECK(w3[i] > 0.0);

  CHECK(thrown_code([&] { approx_weights(s, 4, 0); }) == code_of(ErrorCode::kPrecondition));
  CHECK(thrown_code([&] { approx_weights(s, 1, 2); }) == code_of(ErrorCode::kPrecondition));
  const std::vector<double> stale = {0.5, 0.5};
  CHECK(thrown_code([&] { approx_weights_at(stale, 0.25); }) == code_of(ErrorCode::kSchedule));
}

TEST_CASE("weights sum to one on random decreasing schedules") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const double now = u(rng) * 0.5;
    std::vector<double> times;
    double t = now;
    for (int i = 0; i < 3; ++i) times.push_back(t += 1e-6 + u(rng) * 0.2);
    for (std::size_t h = 1; h <= 3; ++h) {
      const auto w = approx_weights_at(std::span(times).first(h), now);
      double sum = 0.0;
      for (double x : w) sum += x;
      CHECK(std::abs(sum - 1.0) <= 1e-12);
    }
  }
}

TEST_CASE("approximate_features forms the weighted sum") {
  const auto same = history_of({{{2, -1, 3}, 0.5}, {{2, -1, 3}, 0.6}, {{2, -1, 3}, 0.7}});
  const auto w = approx_weights_at(std::vector<double>{0.5, 0.6, 0.7}, 0.4);
  CHECK(approximate_features(same, w) == std::vector<float>{2, -1, 3});

  const auto two = history_of({{{1, 2, 3}, 0.5}, {{3, 2, 1}, 0.6}});
  const std::vector<double> w2 = {0.7, 0.3};
  const auto a = approximate_features(two, w2);
  CHECK(a[0] == doctest::Approx(0.7 * 1 + 0.3 * 3));
  CHECK(a[1] == doctest::Approx(2.0));
  CHECK(a[2] == doctest::Approx(0.7 * 3 + 0.3 * 1));

  const auto basis = history_of({{{1, 0, 0}, 0.6}, {{0, 1, 0}, 0.7}, {{0, 0, 1}, 0.8}});
  const auto wb = approx_weights_at(std::vector<double>{0.6, 0.7, 0.8}, 0.5);
  const auto coords = approximate_features(basis, wb);
  const double reference[] = {0.46685, 0.34351, 0.18964};
  for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(coords[i] - reference[i]) < 1e-4);

  const FeatureHistory empty;
  CHECK(thrown_code([&] { approximate_features(empty, w2); }) == code_of(ErrorCode::kCacheIntegrity));
  CHECK(thrown_code([&] { reuse_features(empty); }) == code_of(ErrorCode::kCacheIntegrity));
  CHECK(thrown_code([&] { approximate_features(two, w); }) == code_of(ErrorCode::kInvalidArgument));
}

TEST_CASE("reuse returns the newest entry and the ring holds three") {
  FeatureHistory h;
  for (int i = 0; i < 5; ++i) h.push(std::vector<float>{static_cast<float>(i)}, 1.0 - 0.1 * i);
  CHECK(h.size() == kHistoryCapacity);
  CHECK(reuse_features(h)[0] == 4.0f);
  CHECK(h[2].output[0] == 2.0f);
}

TEST_CASE("update_cache_state bookkeeping") {
  const auto c = tiny_config();
  auto state = CacheState::create(c);
  state.cf[0] = 5;
  state.cf[1] = 1;
  TokenPartition p;
  p.c1 = {0};
  p.c3 = {1};
  for (TokenId t = 2; t < c.n_tokens; ++t) p.c2.push_back(t);
  Matrix fresh(1, c.d_model, 0.25f);
  const std::vector<TokenId> ids = {0};
  update_cache_state(state, p, ids, fresh, 0.5);
  CHECK(state.cf[0] == 0);
  CHECK(state.cf[1] == 2);
  CHECK(state.cf[2] == 1);
  CHECK(state.selection_counts[0] == 1);
  CHECK(state.history[0].size() == 1);
  CHECK(state.history[1].empty());

  const std::vector<TokenId> wrong = {1};
  CHECK(thrown_code([&] { update_cache_state(state, p, wrong, fresh, 0.4); }) ==
        code_of(ErrorCode::kCacheIntegrity));
  TokenPartition overlap = p;
  overlap.c2.push_back(0);
  CHECK(thrown_code([&] { update_cache_state(state, overlap, ids, fresh, 0.4); }) ==
        code_of(ErrorCode::kCacheIntegrity));
}

TEST_CASE("zero cached ratio reproduces the dense sampler bitwise") {
  ModelConfig c;
  const auto model = init_model(c);
  const auto noise = make_noise(c, 2);
  const auto schedule = make_schedule(28);
  const auto dense = sample_full(model, noise, schedule);
  for (auto kind : {PolicyKind::kNone, PolicyKind::kHistoricalOnly, PolicyKind::kSpecDiff}) {
    const auto p = policy(kind, 0.0);
    const auto table = speculative_prerun(model, noise, 2);
    const auto run = cached_sample(model, noise, schedule, p, &table);
    CHECK(bitwise_equal(run.final_state.tokens, dense.final_state.tokens));
  }
}

TEST_CASE("run-level partition and bookkeeping invariants") {
  ModelConfig c;
  const auto model = init_model(c);
  const auto noise = make_noise(c, 4);
  const auto table = speculative_prerun(model, noise, 2);
  const auto run = cached_sample(model, noise, make_schedule(28), policy(PolicyKind::kSpecDiff, 0.5), &table);
  REQUIRE(run.partitions.size() == 28);
  CHECK(run.steps[0].dense);
  CHECK(run.steps[0].c1 == 64);
  std::vector<std::uint32_t> cf(64, 0);
  for (std::size_t k = 0; k < 28; ++k) {
    const auto& p = run.partitions[k];
    CHECK_NOTHROW(p.validate(64));
    if (k >= 1) CHECK(p.c1.size() == 32);
    CHECK(run.archive.steps[k].trace.query_count() == p.c1.size());
    for (TokenId t : p.c1) cf[t] = 0;
    for (TokenId t : p.c2) cf[t] += 1;
    for (TokenId t : p.c3) cf[t] += 1;
    CHECK(static_cast<std::size_t>(std::count(cf.begin(), cf.end(), 0u)) >= p.c1.size());
  }
  CHECK(cf == run.state.cf);
  CHECK(run.state.kv.complete());
  for (const auto& h : run.state.history) {
    CHECK(h.size() >= 1);
    CHECK(h.size() <= 3);
  }
  const double spec_ratio =
      static_cast<double>(run.ledger.speculation()) / static_cast<double>(28 * dense_step_flops(c).total());
  CHECK(std::abs(spec_ratio - 2.0 / 28.0) < 1e-6);
  REQUIRE(run.archive.speculation.has_value());
  CHECK(run.archive.speculation->steps() == 2);
}

TEST_CASE("cached tokens get reused or approximated velocities") {
  const auto c = tiny_config();
  const auto model = init_model(c);
  const auto noise = make_noise(c, 6);
  const auto schedule = make_schedule(12);
  const auto run = cached_sample(model, noise, schedule, policy(PolicyKind::kHistoricalOnly, 0.75));
  // Replay the engine's velocity assembly from its own histories.
  std::vector<FeatureHistory> hist(c.n_tokens);
  for (std::size_t k = 0; k < 12; ++k) {
    const auto& p = run.partitions[k];
    const auto& out = run.archive.steps[k].outputs;
    const double t = schedule[k];
    for (TokenId tok : p.c2) CHECK(bitwise_equal(out.row(tok), reuse_features(hist[tok])));
    for (TokenId tok : p.c3) {
      std::vector<double> times;
      for (std::size_t i = 0; i < hist[tok].size(); ++i) times.push_back(hist[tok][i].timestep);
      const auto approx = approximate_features(hist[tok], approx_weights_at(times, t));
      CHECK(bitwise_equal(out.row(tok), approx));
    }
    for (TokenId tok : p.c1) hist[tok].push(out.row(tok), t);
  }
}

TEST_CASE("classification ablation folds C3 into C2") {
  const auto c = tiny_config();
  const auto model = init_model(c);
  const auto noise = make_noise(c, 1);
  auto p = policy(PolicyKind::kHistoricalOnly, 0.75);
  p.config.classify_tokens = false;
  const auto run = cached_sample(model, noise, make_schedule(8), p);
  for (const auto& part : run.partitions) CHECK(part.c3.empty());
}

TEST_CASE("specdiff without a table is a precondition error") {
  const auto c = tiny_config();
  const auto model = init_model(c);
  CHECK(thrown_code([&] {
          cached_sample(model, make_noise(c, 0), make_schedule(4), policy(PolicyKind::kSpecDiff, 0.5));
        }) == code_of(ErrorCode::kPrecondition));
}

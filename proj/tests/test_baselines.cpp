// Copyright 2026 The specdiff-lab Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <random>
#include <set>

#include "doctest.h"
#include "specdiff/baselines.hpp"
#include "specdiff/cache_engine.hpp"
#include "specdiff/metrics.hpp"
#include "specdiff/speculation.hpp"
#include "test_support.hpp"

using namespace specdiff;
using namespace specdiff::testing;

namespace {

Policy policy(PolicyKind kind, double cr) {
  Policy p;
  p.kind = kind;
  p.config.cached_ratio = cr;
  return p;
}

}  // namespace

TEST_CASE("policy keys round-trip") {
  for (auto kind : {PolicyKind::kNone, PolicyKind::kIntervalReuse, PolicyKind::kHistoricalOnly,
                    PolicyKind::kRandom, PolicyKind::kTaylorExtrapolate, PolicyKind::kSpecDiff}) {
    CHECK(parse_policy_kind(policy_key(kind)) == kind);
  }
  CHECK(thrown_code([] { parse_policy_kind("fora"); }) == code_of(ErrorCode::kConfiguration));
  Policy p = policy(PolicyKind::kIntervalReuse, 0.5);
  p.period = 0;
  CHECK(thrown_code([&] { p.validate(); }) == code_of(ErrorCode::kConfiguration));
}

TEST_CASE("interval reuse") {
  CHECK(interval_computes(2, 0));
  CHECK_FALSE(interval_computes(2, 1));
  CHECK(interval_computes(2, 2));
  CHECK_FALSE(interval_computes(2, 3));

  ModelConfig c;
  const auto model = init_model(c);
  const auto noise = make_noise(c, 3);
  const auto dense = sample_full(model, noise, make_schedule(28));
  auto every = policy(PolicyKind::kIntervalReuse, 0.5);
  every.period = 1;
  CHECK(bitwise_equal(cached_sample(model, noise, make_schedule(28), every).final_state.tokens,
                      dense.final_state.tokens));

  auto two = policy(PolicyKind::kIntervalReuse, 0.5);
  const auto run = cached_sample(model, noise, make_schedule(4), two);
  CHECK(run.steps[0].c1 == 64);
  CHECK(run.steps[1].c1 == 0);
  CHECK(run.steps[2].c1 == 64);
  CHECK(run.steps[3].c1 == 0);
  CHECK(bitwise_equal(run.archive.steps[1].outputs, run.archive.steps[0].outputs));

  const auto long_run = cached_sample(model, noise, make_schedule(28), two);
  const double ratio =
      static_cast<double>(long_run.ledger.total()) / static_cast<double>(dense.ledger.total());
  CHECK(ratio == doctest::Approx(0.5));
}

TEST_CASE("historical-only differs from specdiff when the table is informative") {
  ModelConfig c;
  const auto model = init_model(c);
  const auto noise = make_noise(c, 0);
  const auto table = speculative_prerun(model, noise, 2);
  const auto schedule = make_schedule(28);
  const auto hist = cached_sample(model, noise, schedule, policy(PolicyKind::kHistoricalOnly, 0.8));
  const auto spec = cached_sample(model, noise, schedule, policy(PolicyKind::kSpecDiff, 0.8), &table);
  std::size_t differing = 0;
  for (std::size_t k = 1; k < 28; ++k) {
    if (hist.partitions[k].c1 != spec.partitions[k].c1) ++differing;
  }
  CHECK(differing >= 1);

  SpeculativeScoreTable flat = table;
  for (auto& e : flat.entries) std::fill(e.scores.begin(), e.scores.end(), 1.0f);
  const auto same = cached_sample(model, noise, schedule, policy(PolicyKind::kSpecDiff, 0.8), &flat);
  for (std::size_t k = 0; k < 28; ++k) CHECK(same.partitions[k].c1 == hist.partitions[k].c1);
}

TEST_CASE("random selection draws the ceil-rule count") {
  std::mt19937_64 a(1), b(2);
  const auto x = random_compute_set(a, 64, 13), y = random_compute_set(b, 64, 13);
  CHECK(x.size() == 13);
  CHECK(std::set<TokenId>(x.begin(), x.end()).size() == 13);
  CHECK(std::is_sorted(x.begin(), x.end()));
  CHECK(x != y);

  const auto c = tiny_config();
  const auto run = cached_sample(init_model(c), make_noise(c, 0), make_schedule(10),
                                 policy(PolicyKind::kRandom, 0.7));
  for (std::size_t k = 1; k < 10; ++k) CHECK(run.steps[k].c1 == compute_set_size(0.7, 16));
}

TEST_CASE("random selection recall matches the hypergeometric mean") {
  // Recall of a uniform m-subset against a fixed m-set has mean m/n and
  // variance (m/n)(1 - m/n)(n - m) / (m (n - 1)).
  const std::size_t n = 400, m = 80;
  std::vector<TokenId> oracle(m);
  for (std::size_t i = 0; i < m; ++i) oracle[i] = static_cast<TokenId>(i * 5);
  std::mt19937_64 rng(17);
  double sum = 0.0;
  const int draws = 1000;
  for (int i = 0; i < draws; ++i) sum += recall(random_compute_set(rng, n, m), oracle);
  const double p = static_cast<double>(m) / n;
  const double var = p * (1 - p) * (n - m) / (static_cast<double>(m) * (n - 1));
  CHECK(std::abs(sum / draws - p) < 3.0 * std::sqrt(var / draws));
}

TEST_CASE("first-order extrapolation is exact on linear histories") {
  FeatureHistory h;
  // f(T) = 2 - 3T per channel 0, 1 + T per channel 1.
  auto f = [](double t) { return std::vector<float>{static_cast<float>(2 - 3 * t), static_cast<float>(1 + t)}; };
  h.push(f(0.75), 0.75);
  CHECK(taylor_extrapolate(h, 0.5) == f(0.75));
  h.push(f(0.625), 0.625);
  const auto e = taylor_extrapolate(h, 0.5);
  CHECK(e[0] == doctest::Approx(2 - 3 * 0.5));
  CHECK(e[1] == doctest::Approx(1.5));
  const FeatureHistory empty;
  CHECK(thrown_code([&] { taylor_extrapolate(empty, 0.1); }) == code_of(ErrorCode::kCacheIntegrity));
}

TEST_CASE("taylor policy runs end to end and stays finite") {
  ModelConfig c;
  const auto run = cached_sample(init_model(c), make_noise(c, 0), make_schedule(28),
                                 policy(PolicyKind::kTaylorExtrapolate, 0.8));
  for (float x : run.final_state.tokens.flat()) REQUIRE(std::isfinite(x));
}

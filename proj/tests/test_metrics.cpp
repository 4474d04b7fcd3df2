// Copyright 2026 The specdiff-lab Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <random>

#include "doctest.h"
#include "specdiff/baselines.hpp"
#include "specdiff/cache_engine.hpp"
#include "specdiff/flops.hpp"
#include "specdiff/metrics.hpp"
#include "specdiff/speculation.hpp"
#include "test_support.hpp"

using namespace specdiff;
using namespace specdiff::testing;

TEST_CASE("recall set arithmetic") {
  const std::vector<TokenId> oracle = {1, 2, 3}, sel = {2, 3, 4};
  CHECK(recall(sel, oracle) == doctest::Approx(2.0 / 3.0));
  CHECK(recall(oracle, oracle) == 1.0);
  const std::vector<TokenId> none;
  CHECK(recall(none, oracle) == 0.0);
}

TEST_CASE("random selection recall at CR=0.75 over 1000 draws") {
  std::mt19937_64 rng(4);
  std::vector<double> score(64);
  for (auto& s : score) s = std::uniform_real_distribution<double>(0, 1)(rng);
  const auto oracle = select_compute_set(score, 0.75);
  double sum = 0.0;
  for (int i = 0; i < 1000; ++i) sum += recall(random_compute_set(rng, 64, 16), oracle);
  CHECK(std::abs(sum / 1000 - 0.25) <= 0.04);
}

TEST_CASE("recall against the dense oracle") {
  ModelConfig c;
  const auto model = init_model(c);
  const auto noise = make_noise(c, 1);
  const auto schedule = make_schedule(28);
  const auto dense = sample_full(model, noise, schedule);
  Policy p;
  p.kind = PolicyKind::kNone;
  const auto same = recall_vs_oracle(cached_sample(model, noise, schedule, p).archive, dense.archive, 0.0);
  CHECK(same.steps.size() == 27);
  for (double r : same.recall) CHECK(r == 1.0);

  p.kind = PolicyKind::kHistoricalOnly;
  p.config.cached_ratio = 0.8;
  const auto run = cached_sample(model, noise, schedule, p);
  for (double r : recall_vs_oracle(run.archive, dense.archive, 0.8).recall) {
    CHECK(r >= 0.0);
    CHECK(r <= 1.0);
  }
  const auto other = sample_full(model, noise, make_schedule(10));
  CHECK(thrown_code([&] { recall_vs_oracle(run.archive, other.archive, 0.8); }) ==
        code_of(ErrorCode::kIncompatibleArchives));
}

TEST_CASE("selection skew") {
  const std::vector<std::uint32_t> even(8, 3);
  const auto e = selection_skew(even);
  CHECK(e.top25_share == doctest::Approx(0.25));
  CHECK(e.never_selected_frac == 0.0);
  const std::vector<std::uint32_t> skewed = {9, 1, 0, 0};
  const auto s = selection_skew(skewed);
  CHECK(s.top25_share == doctest::Approx(0.9));
  CHECK(s.never_selected_frac == doctest::Approx(0.5));
  CHECK(s.histogram[0] == 2);
  CHECK(s.histogram[1] == 1);
  CHECK(s.histogram[9] == 1);
}

TEST_CASE("relative error") {
  const std::vector<float> prev = {1, -2, 3};
  CHECK(relative_error(prev, prev) == 0.0);
  std::vector<float> scaled(3);
  for (int i = 0; i < 3; ++i) scaled[i] = 1.1f * prev[i];
  // Oracle in double on the float-stored values.
  double diff = 0, base = 0;
  for (int i = 0; i < 3; ++i) {
    diff += (double(scaled[i]) - prev[i]) * (double(scaled[i]) - prev[i]);
    base += double(prev[i]) * prev[i];
  }
  CHECK(std::abs(relative_error(scaled, prev) - std::sqrt(diff / base)) < 1e-12);
  CHECK(std::abs(relative_error(scaled, prev) - 0.1) < 1e-6);
  const std::vector<float> zero = {0, 0, 0};
  CHECK(relative_error(prev, zero) == -1.0);
}

TEST_CASE("error profile buckets and coefficient of variation") {
  ModelConfig c;
  const auto dense = sample_full(init_model(c), make_noise(c, 0), make_schedule(28));
  const auto profile = relative_error_profile(dense.archive, 10);
  REQUIRE(profile.buckets.size() == 10);
  std::size_t total = profile.skipped_zero_norm;
  for (const auto& b : profile.buckets) {
    total += b.samples;
    CHECK(b.mean > 0.0);
    CHECK(b.cv == doctest::Approx(b.stddev / b.mean));
  }
  CHECK(total == 27 * 64);

  // Constant error within every bucket gives CV = 0.
  TraceArchive a;
  a.n_layers = 1;
  a.n_tokens = 4;
  a.d_model = 1;
  for (int k = 0; k < 3; ++k) {
    StepRecord s;
    s.step = static_cast<std::uint32_t>(k);
    s.trace.received = Matrix(1, 4);
    for (int t = 0; t < 4; ++t) s.trace.received(0, t) = static_cast<float>(t);
    s.outputs = Matrix(4, 1, static_cast<float>(std::pow(2.0, k)));
    a.steps.push_back(s);
  }
  for (const auto& b : relative_error_profile(a, 2).buckets) {
    CHECK(b.mean == doctest::Approx(1.0));
    CHECK(b.cv == 0.0);
  }
}

TEST_CASE("cosine similarity and decay") {
  const std::vector<float> a = {1, 2, 3}, b = {-2, 1, 0};
  CHECK(cosine_similarity(a, a) == doctest::Approx(1.0));
  CHECK(cosine_similarity(a, b) == 0.0);
  ModelConfig c;
  const auto dense = sample_full(init_model(c), make_noise(c, 2), make_schedule(28));
  const auto decay = similarity_decay(dense.archive, 5);
  REQUIRE(decay.size() == 5);
  const std::vector<double> lags = {1, 2, 3, 4, 5};
  CHECK(spearman(lags, decay) < 0.0);
}

TEST_CASE("spearman") {
  const std::vector<double> x = {1, 2, 3, 4}, up = {10, 20, 30, 40}, down = {4, 3, 2, 1};
  CHECK(spearman(x, up) == doctest::Approx(1.0));
  CHECK(spearman(x, down) == doctest::Approx(-1.0));
}

TEST_CASE("fidelity") {
  Matrix a(2, 2), b(2, 2);
  a(0, 0) = 1.0f;
  a(1, 1) = -0.5f;
  for (std::size_t i = 0; i < 4; ++i) b.flat()[i] = a.flat()[i] + 0.1f;
  const auto f = fidelity(a, b);
  CHECK(f.mse == doctest::Approx(0.01).epsilon(1e-6));
  CHECK(f.psnr == doctest::Approx(20.0).epsilon(1e-5));
  CHECK(fidelity(b, a).mse == f.mse);
  CHECK(fidelity(a, a).psnr == kPsnrCap);
  CHECK(fidelity(a, a).mse == 0.0);
  Matrix far = a;
  far.flat()[0] += 1.0f;
  CHECK(fidelity(a, far).psnr < f.psnr);
}

TEST_CASE("ledger closed form and speedup") {
  ModelConfig c;
  c.n_layers = 1;
  c.n_heads = 1;
  c.d_model = 4;
  c.d_ff = 8;
  c.n_tokens = 4;
  const auto dense = dense_step_flops(c);
  CHECK(dense.qkv + dense.out_proj == 256);
  CHECK(dense.attn_scores + dense.attn_values == 128);
  CHECK(dense.ffn == 256);
  CHECK(dense.total() == 640);
  // One query: 4 * 16 + 2 * 4 * 4 + 2 * 4 * 8.
  CHECK(step_flops(c, 1).total() == 160);

  FlopLedger d, half;
  for (int i = 0; i < 4; ++i) d.add_step(dense);
  CHECK(speedup_estimate(d, d) == 1.0);
  for (int i = 0; i < 2; ++i) half.add_step(dense);
  CHECK(speedup_estimate(half, d) == 2.0);
  half.add_speculation(dense.total() * 2);
  CHECK(speedup_estimate(half, d) == 1.0);

  FlopCounts sum;
  for (const auto& s : d.per_step()) sum += s;
  CHECK(sum == d.by_category());
  CHECK(sum.total() == d.total());

  const auto ai = arithmetic_intensity(64, 64, 64);
  CHECK(ai.workload_over_operands == doctest::Approx(32.0));
  CHECK(ai.standard == doctest::Approx(64.0 / 3.0));
}

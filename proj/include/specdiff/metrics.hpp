// Copyright 2026 The specdiff-lab Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "specdiff/flops.hpp"
#include "specdiff/matrix.hpp"
#include "specdiff/trace.hpp"

namespace specdiff {

// PSNR reported for identical latents and used as a clamp otherwise.
inline constexpr double kPsnrCap = 99.0;

/// |selected ∩ oracle| / |oracle|; both ascending.
double recall(std::span<const TokenId> selected, std::span<const TokenId> oracle);

/// Ascending ids of the tokens flagged as computed in `trace`.
std::vector<TokenId> selected_tokens(const AttentionTrace& trace);

struct RecallSeries {
  std::vector<std::size_t> steps;  // iterations 1..N-1
  std::vector<double> recall;

  double mean() const;
};

/// Per-iteration recall of the run's computed set against the top-(1-CR)
/// tokens by attention received in the oracle (dense) run at the same step.
/// Throws ErrorCode::kIncompatibleArchives on dims or schedule mismatch.
RecallSeries recall_vs_oracle(const TraceArchive& run, const TraceArchive& oracle,
                              double cached_ratio);

struct SkewStats {
  double top25_share = 0.0;          // selections held by the top quartile of tokens
  double never_selected_frac = 0.0;  // tokens never selected
  std::vector<std::size_t> histogram;  // histogram[c] = tokens selected c times
};

SkewStats selection_skew(std::span<const std::uint32_t> counts);

/// Times each token was computed, counting iterations from `first_step` on.
std::vector<std::uint32_t> selection_counts(const TraceArchive& archive, std::size_t first_step = 1);

struct ErrorBucket {
  std::size_t samples = 0;
  double mean = 0.0;
  double stddev = 0.0;
  double cv = 0.0;  // stddev / mean
};

struct ErrorProfile {
  std::vector<ErrorBucket> buckets;  // ascending score order, buckets[0] = lowest decile
  std::size_t skipped_zero_norm = 0;
};

/// ||current - previous|| / ||previous||. Returns a negative value when
/// `previous` has zero norm.
double relative_error(std::span<const float> current, std::span<const float> previous);

/// Relative output change between consecutive iterations, bucketed by the
/// token's historical score (attention received in the previous iteration).
ErrorProfile relative_error_profile(const TraceArchive& dense, std::size_t n_buckets = 10);

double cosine_similarity(std::span<const float> a, std::span<const float> b);

/// Mean cosine similarity of each token's output with its output `lag`
/// iterations earlier, for lag = 1..max_lag.
std::vector<double> similarity_decay(const TraceArchive& dense, std::size_t max_lag = 5);

/// Spearman rank correlation with average ranks for ties.
double spearman(std::span<const double> x, std::span<const double> y);

struct Fidelity {
  double mse = 0.0;
  double psnr = kPsnrCap;
};

/// MSE and PSNR of `other` against `reference`; peak = max |reference|.
Fidelity fidelity(const Matrix& reference, const Matrix& other);

}  // namespace specdiff

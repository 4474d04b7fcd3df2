// Copyright 2026 The specdiff-lab Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#include "specdiff/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "specdiff/error.hpp"
#include "specdiff/importance.hpp"

namespace specdiff {

double recall(std::span<const TokenId> selected, std::span<const TokenId> oracle) {
  require(!oracle.empty(), ErrorCode::kInvalidArgument, "recall: empty oracle set");
  std::size_t hits = 0;
  auto it = selected.begin();
  for (TokenId t : oracle) {
    while (it != selected.end() && *it < t) ++it;
    if (it != selected.end() && *it == t) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(oracle.size());
}

std::vector<TokenId> selected_tokens(const AttentionTrace& trace) {
  std::vector<TokenId> ids;
  for (std::size_t t = 0; t < trace.computed.size(); ++t) {
    if (trace.computed[t]) ids.push_back(static_cast<TokenId>(t));
  }
  return ids;
}

double RecallSeries::mean() const {
  if (recall.empty()) return 0.0;
  return std::accumulate(recall.begin(), recall.end(), 0.0) / static_cast<double>(recall.size());
}

RecallSeries recall_vs_oracle(const TraceArchive& run, const TraceArchive& oracle,
                              double cached_ratio) {
  require(run.n_tokens == oracle.n_tokens && run.n_layers == oracle.n_layers,
          ErrorCode::kIncompatibleArchives, "recall_vs_oracle: archive dimensions differ");
  require(run.schedule == oracle.schedule && run.steps.size() == oracle.steps.size(),
          ErrorCode::kIncompatibleArchives, "recall_vs_oracle: archive schedules differ");
  RecallSeries series;
  for (std::size_t k = 1; k < run.steps.size(); ++k) {
    const auto truth = select_compute_set(attention_received(oracle.steps[k].trace), cached_ratio);
    series.steps.push_back(k);
    series.recall.push_back(recall(selected_tokens(run.steps[k].trace), truth));
  }
  return series;
}

SkewStats selection_skew(std::span<const std::uint32_t> counts) {
  SkewStats stats;
  if (counts.empty()) return stats;
  std::vector<std::uint32_t> sorted(counts.begin(), counts.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  const std::size_t quartile = std::max<std::size_t>(1, (sorted.size() + 3) / 4);
  std::uint64_t total = 0, top = 0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    total += sorted[i];
    if (i < quartile) top += sorted[i];
  }
  stats.top25_share = total == 0 ? 0.0 : static_cast<double>(top) / static_cast<double>(total);
  const auto never = std::count(counts.begin(), counts.end(), 0u);
  stats.never_selected_frac = static_cast<double>(never) / static_cast<double>(counts.size());
  stats.histogram.assign(static_cast<std::size_t>(sorted.front()) + 1, 0);
  for (auto c : counts) stats.histogram[c] += 1;
  return stats;
}

std::vector<std::uint32_t> selection_counts(const TraceArchive& archive, std::size_t first_step) {
  std::vector<std::uint32_t> counts(archive.n_tokens, 0);
  for (std::size_t k = first_step; k < archive.steps.size(); ++k) {
    const auto& computed = archive.steps[k].trace.computed;
    for (std::size_t t = 0; t < computed.size() && t < counts.size(); ++t) counts[t] += computed[t];
  }
  return counts;
}

double relative_error(std::span<const float> current, std::span<const float> previous) {
  require(current.size() == previous.size(), ErrorCode::kInvalidArgument,
          "relative_error: length mismatch");
  double diff = 0.0, base = 0.0;
  for (std::size_t i = 0; i < current.size(); ++i) {
    const double d = static_cast<double>(current[i]) - previous[i];
    diff += d * d;
    base += static_cast<double>(previous[i]) * previous[i];
  }
  if (base == 0.0) return -1.0;
  return std::sqrt(diff) / std::sqrt(base);
}

ErrorProfile relative_error_profile(const TraceArchive& dense, std::size_t n_buckets) {
  require(n_buckets >= 1, ErrorCode::kInvalidArgument, "relative_error_profile: no buckets");
  const std::size_t n = dense.n_tokens;
  std::vector<std::vector<double>> samples(n_buckets);
  ErrorProfile profile;
  for (std::size_t k = 1; k < dense.steps.size(); ++k) {
    const auto score = attention_received(dense.steps[k - 1].trace);
    auto order = rank_descending(score);
    std::reverse(order.begin(), order.end());  // ascending score
    for (std::size_t rank = 0; rank < n; ++rank) {
      const TokenId t = order[rank];
      const double err =
          relative_error(dense.steps[k].outputs.row(t), dense.steps[k - 1].outputs.row(t));
      if (err < 0.0) {
        ++profile.skipped_zero_norm;
        continue;
      }
      samples[rank * n_buckets / n].push_back(err);
    }
  }
  profile.buckets.resize(n_buckets);
  for (std::size_t b = 0; b < n_buckets; ++b) {
    auto& bucket = profile.buckets[b];
    const auto& xs = samples[b];
    bucket.samples = xs.size();
    if (xs.empty()) continue;
    bucket.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
    double var = 0.0;
    for (double x : xs) var += (x - bucket.mean) * (x - bucket.mean);
    bucket.stddev = std::sqrt(var / static_cast<double>(xs.size()));
    bucket.cv = bucket.mean > 0.0 ? bucket.stddev / bucket.mean : 0.0;
  }
  return profile;
}

double cosine_similarity(std::span<const float> a, std::span<const float> b) {
  require(a.size() == b.size(), ErrorCode::kInvalidArgument, "cosine_similarity: length mismatch");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<double>(a[i]) * b[i];
    na += static_cast<double>(a[i]) * a[i];
    nb += static_cast<double>(b[i]) * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

std::vector<double> similarity_decay(const TraceArchive& dense, std::size_t max_lag) {
  require(max_lag >= 1 && max_lag < dense.steps.size(), ErrorCode::kInvalidArgument,
          "similarity_decay: archive has " + std::to_string(dense.steps.size()) +
              " steps, too few for lag " + std::to_string(max_lag));
  std::vector<double> decay(max_lag, 0.0);
  for (std::size_t lag = 1; lag <= max_lag; ++lag) {
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t k = lag; k < dense.steps.size(); ++k) {
      for (std::size_t t = 0; t < dense.n_tokens; ++t) {
        sum += cosine_similarity(dense.steps[k].outputs.row(t), dense.steps[k - lag].outputs.row(t));
        ++count;
      }
    }
    decay[lag - 1] = sum / static_cast<double>(count);
  }
  return decay;
}

namespace {

std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t m = i; m <= j; ++m) ranks[idx[m]] = avg;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double spearman(std::span<const double> x, std::span<const double> y) {
  require(x.size() == y.size() && x.size() >= 2, ErrorCode::kInvalidArgument,
          "spearman: need two equal-length series of at least two points");
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const double mean = (static_cast<double>(x.size()) + 1.0) / 2.0;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (rx[i] - mean) * (ry[i] - mean);
    sxx += (rx[i] - mean) * (rx[i] - mean);
    syy += (ry[i] - mean) * (ry[i] - mean);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

Fidelity fidelity(const Matrix& reference, const Matrix& other) {
  require(reference.rows() == other.rows() && reference.cols() == other.cols() && !reference.empty(),
          ErrorCode::kInvalidArgument, "fidelity: latent shapes differ");
  const auto a = reference.flat();
  const auto b = other.flat();
  double sq = 0.0, peak = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - b[i];
    sq += d * d;
    peak = std::max(peak, std::abs(static_cast<double>(a[i])));
  }
  Fidelity f;
  f.mse = sq / static_cast<double>(a.size());
  if (f.mse == 0.0) {
    f.psnr = kPsnrCap;
  } else {
    f.psnr = std::clamp(10.0 * std::log10(peak * peak / f.mse), -kPsnrCap, kPsnrCap);
  }
  return f;
}

}  // namespace specdiff

// Copyright 2026 The specdiff-lab Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "specdiff/baselines.hpp"
#include "specdiff/cache_engine.hpp"
#include "specdiff/metrics.hpp"
#include "specdiff/model_config.hpp"
#include "specdiff/toy_dit.hpp"

namespace specdiff {

inline constexpr std::string_view kVersionString = "specdiff-lab 0.1.0";

struct ExperimentConfig {
  ModelConfig model;
  std::size_t steps = 28;
  Policy policy;
  std::uint64_t noise_seed = 0;
  std::filesystem::path out;        // report path; empty writes to the caller's stream
  std::filesystem::path trace_out;  // optional SPDT archive of the cached run
  bool analysis = true;             // error profile + similarity decay of the dense run

  ExperimentConfig();
  void validate() const;
};

/// Applies one flat `key = value` setting. Unknown keys and malformed values
/// throw ErrorCode::kConfiguration.
void apply_setting(ExperimentConfig& config, std::string_view key, std::string_view value);

/// Reads a flat key/value file: one `key = value` per line, `#` comments.
void apply_config_file(ExperimentConfig& config, const std::filesystem::path& path);

/// Every key accepted by apply_setting, in report order.
std::vector<std::pair<std::string, std::string>> config_entries(const ExperimentConfig& config);

struct RunReport {
  std::string version;
  ExperimentConfig config;
  std::string policy_label;
  std::vector<StepSummary> steps;
  FlopCounts cached_by_category;
  std::uint64_t dense_flops = 0;
  std::uint64_t cached_flops = 0;
  std::uint64_t speculation_flops = 0;
  double speedup = 1.0;
  Fidelity fidelity;
  RecallSeries recall;
  SkewStats skew;
  std::optional<ErrorProfile> error_profile;
  std::vector<double> similarity;
};

struct RunOutcome {
  SampleResult dense;
  CachedSampleResult cached;
  RunReport report;
};

/// Dense reference, optional speculative pre-run and the cached run, all on
/// the same noise, plus every report metric.
RunOutcome run_experiment(const ExperimentConfig& config);

struct ReplayResult {
  std::vector<std::vector<TokenId>> selections;  // per step, ascending
  RecallSeries recall;                           // replayed selection vs oracle
  RecallSeries recorded_recall;                  // archive's own selection vs oracle
  SkewStats skew;
};

/// Re-runs scoring and selection over recorded traces without any forward
/// pass. `oracle` defaults to the archive itself.
ReplayResult replay_selection(const TraceArchive& archive, const Policy& policy,
                              const TraceArchive* oracle = nullptr);

}  // namespace specdiff

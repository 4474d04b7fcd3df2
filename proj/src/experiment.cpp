// Copyright 2026 The specdiff-lab Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#include "specdiff/experiment.hpp"

#include <charconv>
#include <fstream>
#include <random>
#include <sstream>

#include "specdiff/error.hpp"
#include "specdiff/importance.hpp"
#include "specdiff/report.hpp"
#include "specdiff/speculation.hpp"
#include "specdiff/trace_archive.hpp"

namespace specdiff {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value) {
  fail(ErrorCode::kConfiguration,
       "config: invalid value '" + std::string(value) + "' for key '" + std::string(key) + "'");
}

template <typename T>
T parse_integer(std::string_view key, std::string_view value) {
  T out{};
  const auto* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) bad_value(key, value);
  return out;
}

double parse_real(std::string_view key, std::string_view value) {
  double out = 0.0;
  const auto* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) bad_value(key, value);
  return out;
}

bool parse_bool(std::string_view key, std::string_view value) {
  if (value == "true" || value == "1" || value == "on") return true;
  if (value == "false" || value == "0" || value == "off") return false;
  bad_value(key, value);
}

std::vector<TokenId> all_tokens(std::size_t n) {
  std::vector<TokenId> ids(n);
  for (std::size_t t = 0; t < n; ++t) ids[t] = static_cast<TokenId>(t);
  return ids;
}

}  // namespace

ExperimentConfig::ExperimentConfig() { policy.config.cached_ratio = 0.92; }

void ExperimentConfig::validate() const {
  model.validate();
  require(steps >= 1, ErrorCode::kConfiguration, "config: steps must be >= 1");
  policy.validate();
}

void apply_setting(ExperimentConfig& c, std::string_view key, std::string_view value) {
  value = trim(value);
  auto& pc = c.policy.config;
  if (key == "n_layers") c.model.n_layers = parse_integer<std::size_t>(key, value);
  else if (key == "n_heads") c.model.n_heads = parse_integer<std::size_t>(key, value);
  else if (key == "d_model") c.model.d_model = parse_integer<std::size_t>(key, value);
  else if (key == "d_ff") c.model.d_ff = parse_integer<std::size_t>(key, value);
  else if (key == "n_tokens") c.model.n_tokens = parse_integer<std::size_t>(key, value);
  else if (key == "model_seed") c.model.seed = parse_integer<std::uint64_t>(key, value);
  else if (key == "qk_gain") c.model.qk_gain = static_cast<float>(parse_real(key, value));
  else if (key == "steps") c.steps = parse_integer<std::size_t>(key, value);
  else if (key == "policy") c.policy.kind = parse_policy_kind(value);
  else if (key == "cr") pc.cached_ratio = parse_real(key, value);
  else if (key == "spec_steps") pc.speculation_steps = parse_integer<std::size_t>(key, value);
  else if (key == "c2_mass") pc.c2_mass = parse_real(key, value);
  else if (key == "warmup_steps") pc.warmup_steps = parse_integer<std::size_t>(key, value);
  else if (key == "starvation") pc.starvation_enabled = parse_bool(key, value);
  else if (key == "history_window") pc.history_window = parse_integer<std::size_t>(key, value);
  else if (key == "classify") pc.classify_tokens = parse_bool(key, value);
  else if (key == "approximate") pc.approximate = parse_bool(key, value);
  else if (key == "period") c.policy.period = parse_integer<std::size_t>(key, value);
  else if (key == "policy_seed") c.policy.random_seed = parse_integer<std::uint64_t>(key, value);
  else if (key == "noise_seed") c.noise_seed = parse_integer<std::uint64_t>(key, value);
  else if (key == "out") c.out = std::string(value);
  else if (key == "trace_out") c.trace_out = std::string(value);
  else if (key == "analysis") c.analysis = parse_bool(key, value);
  else fail(ErrorCode::kConfiguration, "config: unknown key '" + std::string(key) + "'");
}

void apply_config_file(ExperimentConfig& config, const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::kConfiguration,
          "config: cannot open '" + path.string() + "'");
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    std::string_view view = line;
    if (const auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
    view = trim(view);
    if (view.empty()) continue;
    const auto eq = view.find('=');
    if (eq == std::string_view::npos) {
      fail(ErrorCode::kConfiguration,
           "config: line " + std::to_string(number) + " is not 'key = value'");
    }
    const auto key = trim(view.substr(0, eq));
    if (key.empty()) {
      fail(ErrorCode::kConfiguration, "config: line " + std::to_string(number) + " has no key");
    }
    apply_setting(config, key, view.substr(eq + 1));
  }
}

std::vector<std::pair<std::string, std::string>> config_entries(const ExperimentConfig& c) {
  const auto& pc = c.policy.config;
  auto b = [](bool v) { return std::string(v ? "true" : "false"); };
  std::ostringstream gain;
  gain << c.model.qk_gain;
  return {
      {"n_layers", std::to_string(c.model.n_layers)},
      {"n_heads", std::to_string(c.model.n_heads)},
      {"d_model", std::to_string(c.model.d_model)},
      {"d_ff", std::to_string(c.model.d_ff)},
      {"n_tokens", std::to_string(c.model.n_tokens)},
      {"model_seed", std::to_string(c.model.seed)},
      {"qk_gain", gain.str()},
      {"steps", std::to_string(c.steps)},
      {"policy", std::string(policy_key(c.policy.kind))},
      {"cr", format_real(pc.cached_ratio)},
      {"spec_steps", std::to_string(pc.speculation_steps)},
      {"c2_mass", format_real(pc.c2_mass)},
      {"warmup_steps", std::to_string(pc.warmup_steps)},
      {"starvation", b(pc.starvation_enabled)},
      {"history_window", std::to_string(pc.history_window)},
      {"classify", b(pc.classify_tokens)},
      {"approximate", b(pc.approximate)},
      {"period", std::to_string(c.policy.period)},
      {"policy_seed", std::to_string(c.policy.random_seed)},
      {"noise_seed", std::to_string(c.noise_seed)},
      {"analysis", b(c.analysis)},
  };
}

RunOutcome run_experiment(const ExperimentConfig& config) {
  config.validate();
  const auto model = init_model(config.model);
  const auto noise = make_noise(config.model, config.noise_seed);
  const auto schedule = make_schedule(config.steps);

  RunOutcome outcome;
  outcome.dense = sample_full(model, noise, schedule);
  std::optional<SpeculativeScoreTable> table;
  if (config.policy.uses_speculation()) {
    table = speculative_prerun(model, noise, config.policy.config.speculation_steps);
  }
  outcome.cached = cached_sample(model, noise, schedule, config.policy, table ? &*table : nullptr);

  auto& r = outcome.report;
  r.version = std::string(kVersionString);
  r.config = config;
  r.policy_label = display_name(config.policy);
  r.steps = outcome.cached.steps;
  r.cached_by_category = outcome.cached.ledger.by_category();
  r.dense_flops = outcome.dense.ledger.total();
  r.cached_flops = outcome.cached.ledger.total();
  r.speculation_flops = outcome.cached.ledger.speculation();
  r.speedup = speedup_estimate(outcome.cached.ledger, outcome.dense.ledger);
  r.fidelity = fidelity(outcome.dense.archive.final_latent, outcome.cached.archive.final_latent);
  r.recall = recall_vs_oracle(outcome.cached.archive, outcome.dense.archive,
                              config.policy.config.cached_ratio);
  r.skew = selection_skew(
      selection_counts(outcome.cached.archive, config.policy.config.warmup_steps));
  if (config.analysis && config.steps >= 2) {
    r.error_profile = relative_error_profile(outcome.dense.archive);
    r.similarity = similarity_decay(outcome.dense.archive, std::min<std::size_t>(5, config.steps - 1));
  }
  return outcome;
}

ReplayResult replay_selection(const TraceArchive& archive, const Policy& policy,
                              const TraceArchive* oracle) {
  policy.validate();
  validate_archive(archive);
  const TraceArchive& truth = oracle != nullptr ? *oracle : archive;
  const std::size_t n = archive.n_tokens;
  const auto& pc = policy.config;
  if (policy.uses_speculation()) {
    require(archive.speculation.has_value() && !archive.speculation->empty(),
            ErrorCode::kPrecondition, "replay: archive carries no speculative score table");
  }

  ReplayResult result;
  std::vector<std::uint32_t> cf(n, 0);
  std::mt19937_64 rng(policy.random_seed);
  for (std::size_t k = 0; k < archive.steps.size(); ++k) {
    std::vector<TokenId> chosen;
    const bool dense = policy.kind == PolicyKind::kNone || k < pc.warmup_steps ||
                       (policy.kind == PolicyKind::kIntervalReuse && interval_computes(policy.period, k));
    if (dense) {
      chosen = all_tokens(n);
    } else if (policy.kind == PolicyKind::kIntervalReuse) {
      // nothing recomputed
    } else if (policy.kind == PolicyKind::kRandom) {
      chosen = random_compute_set(rng, n, compute_set_size(pc.cached_ratio, n));
    } else {
      auto his = historical_score(archive, k);
      auto fut = policy.uses_speculation()
                     ? future_score(*archive.speculation, archive.steps[k].timestep)
                     : std::vector<double>(n, 1.0);
      auto star = starvation_score(cf, pc.starvation_enabled);
      const auto record = combined_score(std::move(his), std::move(fut), std::move(star));
      chosen = select_compute_set(record.score, pc.cached_ratio);
    }
    std::vector<std::uint8_t> picked(n, 0);
    for (TokenId t : chosen) picked[t] = 1;
    for (std::size_t t = 0; t < n; ++t) cf[t] = picked[t] ? 0 : cf[t] + 1;
    result.selections.push_back(std::move(chosen));
  }

  require(truth.n_tokens == archive.n_tokens && truth.schedule == archive.schedule,
          ErrorCode::kIncompatibleArchives, "replay: oracle archive does not match");
  for (std::size_t k = 1; k < archive.steps.size(); ++k) {
    const auto oracle_set =
        select_compute_set(attention_received(truth.steps[k].trace), pc.cached_ratio);
    result.recall.steps.push_back(k);
    result.recall.recall.push_back(recall(result.selections[k], oracle_set));
  }
  result.recorded_recall = recall_vs_oracle(archive, truth, pc.cached_ratio);

  std::vector<std::uint32_t> counts(n, 0);
  for (std::size_t k = pc.warmup_steps; k < result.selections.size(); ++k) {
    for (TokenId t : result.selections[k]) counts[t] += 1;
  }
  result.skew = selection_skew(counts);
  return result;
}

}  // namespace specdiff

// Copyright 2026 The specdiff-lab Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#include "specdiff/cli.hpp"

#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "specdiff/error.hpp"
#include "specdiff/experiment.hpp"
#include "specdiff/report.hpp"
#include "specdiff/trace_archive.hpp"

namespace specdiff {

namespace {

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kConfiguration: return kExitConfig;
    case ErrorCode::kFormat:
    case ErrorCode::kUnsupportedVersion:
    case ErrorCode::kIncompatibleArchives:
    case ErrorCode::kTraceFormat: return kExitFormat;
    case ErrorCode::kIo: return kExitIo;
    default: return kExitFailure;
  }
}

// Flag values are kept as strings and applied through apply_setting.
struct SettingFlags {
  std::map<std::string, std::string> values;
  std::optional<std::string> config_path;
  bool no_starvation = false;
  bool no_classify = false;
  bool no_approx = false;

  void add(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
    app->add_option_function<std::string>(
        flag, [this, key](const std::string& v) { values[key] = v; }, help);
  }

  void add_policy_flags(CLI::App* app) {
    add(app, "--policy", "policy",
        "none | interval_reuse | historical_only | random | taylor_extrapolate | specdiff");
    add(app, "--spec-steps", "spec_steps", "speculative pre-run steps");
    add(app, "--c2-mass", "c2_mass", "score mass budget for direct reuse");
    add(app, "--warmup", "warmup_steps", "leading dense iterations");
    add(app, "--period", "period", "interval_reuse period");
    add(app, "--policy-seed", "policy_seed", "random policy seed");
    app->add_flag("--no-starvation", no_starvation, "disable the starvation score");
    app->add_flag("--no-classify", no_classify, "reuse every cached token directly");
    app->add_flag("--no-approx", no_approx, "reuse instead of weighted approximation");
  }

  void add_run_flags(CLI::App* app) {
    add_policy_flags(app);
    add(app, "--steps", "steps", "sampler iterations");
    add(app, "--seed", "model_seed", "model weight seed");
    add(app, "--noise-seed", "noise_seed", "initial noise seed");
    add(app, "--n-tokens", "n_tokens", "token count (square)");
    add(app, "--d-model", "d_model", "embedding width");
    add(app, "--layers", "n_layers", "transformer blocks");
    add(app, "--heads", "n_heads", "attention heads");
    add(app, "--d-ff", "d_ff", "feed-forward width");
    add(app, "--qk-gain", "qk_gain", "query/key init gain");
    app->add_option("--config", config_path, "flat key = value config file");
  }

  void apply(ExperimentConfig& config) const {
    if (config_path) apply_config_file(config, *config_path);
    for (const auto& [key, value] : values) apply_setting(config, key, value);
    if (no_starvation) apply_setting(config, "starvation", "false");
    if (no_classify) apply_setting(config, "classify", "false");
    if (no_approx) apply_setting(config, "approximate", "false");
    config.validate();
  }
};

// Writes to `path` when given, else to `fallback`.
void emit(const std::string& content, const std::filesystem::path& path, std::ostream& fallback) {
  if (path.empty()) {
    fallback << content;
    return;
  }
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(file), ErrorCode::kIo, "cannot open '" + path.string() + "' for writing");
  file << content;
  require(static_cast<bool>(file), ErrorCode::kIo, "write to '" + path.string() + "' failed");
}

std::vector<std::string> split_list(const std::string& list) {
  std::vector<std::string> items;
  std::stringstream s(list);
  std::string item;
  while (std::getline(s, item, ',')) {
    if (!item.empty()) items.push_back(item);
  }
  return items;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Feature-caching laboratory for a toy diffusion transformer", "specdiff"};
  app.require_subcommand(1);

  SettingFlags run_flags;
  std::optional<std::string> trace_out, run_out;
  auto* run = app.add_subcommand("run", "cached sampling run; writes a report and optional trace");
  run_flags.add_run_flags(run);
  run_flags.add(run, "--cr", "cr", "cached ratio in [0, 1)");
  run->add_option("--out", run_out, "report path (default stdout)");
  run->add_option("--trace-out", trace_out, "SPDT archive of the cached run");

  SettingFlags cmp_flags;
  std::string policies = "none,random,historical_only,specdiff";
  std::vector<std::string> crs;
  std::optional<std::string> cmp_csv;
  auto* compare = app.add_subcommand("compare", "run several policies on one noise; CSV table");
  cmp_flags.add_run_flags(compare);
  compare->add_option("--policies", policies, "comma-separated policy list");
  compare->add_option("--cr", crs, "cached ratio(s), comma separated")->delimiter(',');
  compare->add_option("--csv", cmp_csv, "CSV path (default stdout)");

  SettingFlags replay_flags;
  std::string replay_path;
  std::optional<std::string> replay_oracle, replay_csv, replay_out;
  auto* replay = app.add_subcommand("replay", "selection-only evaluation over a recorded archive");
  replay->add_option("archive", replay_path, "SPDT archive")->required();
  replay_flags.add_policy_flags(replay);
  replay_flags.add(replay, "--cr", "cr", "cached ratio in [0, 1)");
  replay->add_option("--oracle", replay_oracle, "dense archive used as oracle (default: the input)");
  replay->add_option("--csv", replay_csv, "CSV path (default stdout)");
  replay->add_option("--out", replay_out, "summary report path");

  std::string metrics_ref;
  std::optional<std::string> metrics_other, metrics_out;
  auto* metrics = app.add_subcommand("metrics", "fidelity between two archives, analysis of one");
  metrics->add_option("reference", metrics_ref, "reference archive")->required();
  metrics->add_option("other", metrics_other, "archive compared against the reference");
  metrics->add_option("--out", metrics_out, "output path (default stdout)");

  std::string dump_path;
  std::optional<std::string> dump_csv;
  auto* dump = app.add_subcommand("dump", "archive to CSV");
  dump->add_option("archive", dump_path, "SPDT archive")->required();
  dump->add_option("--csv", dump_csv, "CSV path (default stdout)");

  std::vector<std::string> argv_store;
  argv_store.reserve(args.size() + 1);
  argv_store.emplace_back("specdiff");
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_store) argv.push_back(a.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    write_error_stub(err, ErrorCode::kConfiguration, e.what());
    return kExitConfig;
  } catch (const Error& e) {
    write_error_stub(err, e.code(), e.what());
    return exit_code_for(e.code());
  }

  try {
    if (run->parsed()) {
      ExperimentConfig config;
      run_flags.apply(config);
      if (run_out) config.out = *run_out;
      if (trace_out) config.trace_out = *trace_out;
      const auto outcome = run_experiment(config);
      std::ostringstream text;
      write_report(text, outcome.report);
      if (!config.trace_out.empty()) write_archive(config.trace_out, outcome.cached.archive);
      emit(text.str(), config.out, out);
    } else if (compare->parsed()) {
      ExperimentConfig base;
      cmp_flags.apply(base);
      std::vector<ExperimentConfig> configs;
      const auto cr_list = crs.empty() ? std::vector<std::string>{format_real(base.policy.config.cached_ratio)} : crs;
      for (const auto& cr : cr_list) {
        for (const auto& policy : split_list(policies)) {
          ExperimentConfig c = base;
          apply_setting(c, "policy", policy);
          apply_setting(c, "cr", cr);
          c.analysis = false;
          c.validate();
          configs.push_back(std::move(c));
        }
      }
      std::ostringstream csv;
      csv << kCompareHeader << "\n";
      for (const auto& c : configs) write_compare_row(csv, run_experiment(c).report);
      emit(csv.str(), cmp_csv.value_or(""), out);
    } else if (replay->parsed()) {
      ExperimentConfig config;
      replay_flags.apply(config);
      const auto archive = read_archive(replay_path);
      std::optional<TraceArchive> oracle;
      if (replay_oracle) oracle = read_archive(*replay_oracle);
      const auto result = replay_selection(archive, config.policy, oracle ? &*oracle : nullptr);
      std::ostringstream csv;
      write_replay_csv(csv, archive, result);
      if (replay_out) {
        std::ostringstream text;
        text << "# specdiff-lab replay\n";
        text << "version=" << kVersionString << "\n";
        text << "policy=" << policy_key(config.policy.kind) << "\n";
        text << "cr=" << format_real(config.policy.config.cached_ratio) << "\n";
        text << "mean_recall=" << format_real(result.recall.mean()) << "\n";
        text << "recorded_mean_recall=" << format_real(result.recorded_recall.mean()) << "\n";
        text << "top25_share=" << format_real(result.skew.top25_share) << "\n";
        text << "never_selected_frac=" << format_real(result.skew.never_selected_frac) << "\n";
        emit(text.str(), *replay_out, out);
      }
      emit(csv.str(), replay_csv.value_or(""), out);
    } else if (metrics->parsed()) {
      const auto reference = read_archive(metrics_ref);
      std::ostringstream text;
      text << "# specdiff-lab metrics\n";
      text << "version=" << kVersionString << "\n";
      if (metrics_other) {
        const auto other = read_archive(*metrics_other);
        const auto f = fidelity(reference.final_latent, other.final_latent);
        text << "peak_convention=max_abs_reference_latent\n";
        text << "mse=" << format_real(f.mse) << "\n";
        text << "psnr=" << format_real(f.psnr) << "\n";
      }
      if (reference.steps.size() >= 2) {
        const auto profile = relative_error_profile(reference);
        text << "\n[error_profile]\nskipped_zero_norm=" << profile.skipped_zero_norm << "\n";
        text << "bucket,samples,mean,stddev,cv\n";
        for (std::size_t b = 0; b < profile.buckets.size(); ++b) {
          const auto& e = profile.buckets[b];
          text << b << "," << e.samples << "," << format_real(e.mean) << ","
               << format_real(e.stddev) << "," << format_real(e.cv) << "\n";
        }
        const auto decay =
            similarity_decay(reference, std::min<std::size_t>(5, reference.steps.size() - 1));
        text << "\n[similarity_decay]\nlag,mean_cosine\n";
        for (std::size_t i = 0; i < decay.size(); ++i) {
          text << i + 1 << "," << format_real(decay[i]) << "\n";
        }
      }
      emit(text.str(), metrics_out.value_or(""), out);
    } else if (dump->parsed()) {
      const auto archive = read_archive(dump_path);
      std::ostringstream csv;
      write_archive_csv(csv, archive);
      emit(csv.str(), dump_csv.value_or(""), out);
    }
  } catch (const Error& e) {
    write_error_stub(err, e.code(), e.what());
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    write_error_stub(err, ErrorCode::kInvalidArgument, e.what());
    return kExitFailure;
  }
  return kExitOk;
}

}  // namespace specdiff

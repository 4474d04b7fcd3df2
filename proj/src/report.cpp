// Copyright 2026 The specdiff-lab Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#include "specdiff/report.hpp"

#include <iomanip>
#include <ostream>
#include <sstream>

#include "specdiff/error.hpp"

namespace specdiff {

std::string format_real(double value) {
  std::ostringstream s;
  s << std::setprecision(10) << value;
  return s.str();
}

void write_report(std::ostream& out, const RunReport& r) {
  out << "# specdiff-lab run report\n";
  out << "version=" << r.version << "\n";
  out << "policy_label=" << r.policy_label << "\n";
  out << "\n[config]\n";
  for (const auto& [key, value] : config_entries(r.config)) out << key << "=" << value << "\n";

  out << "\n[flops]\n";
  out << "unit=multiply_adds\n";
  out << "dense_total=" << r.dense_flops << "\n";
  out << "cached_total=" << r.cached_flops << "\n";
  out << "speculation_total=" << r.speculation_flops << "\n";
  out << "cached_qkv=" << r.cached_by_category.qkv << "\n";
  out << "cached_attn_scores=" << r.cached_by_category.attn_scores << "\n";
  out << "cached_attn_values=" << r.cached_by_category.attn_values << "\n";
  out << "cached_out_proj=" << r.cached_by_category.out_proj << "\n";
  out << "cached_ffn=" << r.cached_by_category.ffn << "\n";
  out << "speedup_estimate=" << format_real(r.speedup) << "\n";
  const auto& m = r.config.model;
  const auto gemm = arithmetic_intensity(static_cast<double>(m.n_tokens),
                                         static_cast<double>(m.d_model),
                                         static_cast<double>(m.d_model));
  out << "projection_intensity_workload_over_operands=" << format_real(gemm.workload_over_operands)
      << "\n";
  out << "projection_intensity_standard=" << format_real(gemm.standard) << "\n";

  out << "\n[fidelity]\n";
  out << "reference=dense run on the same noise\n";
  out << "peak_convention=max_abs_reference_latent\n";
  out << "mse=" << format_real(r.fidelity.mse) << "\n";
  out << "psnr=" << format_real(r.fidelity.psnr) << "\n";

  out << "\n[selection]\n";
  out << "recall_oracle=dense run attention at the same step (cached trajectory shift not corrected)\n";
  out << "mean_recall=" << format_real(r.recall.mean()) << "\n";
  out << "top25_share=" << format_real(r.skew.top25_share) << "\n";
  out << "never_selected_frac=" << format_real(r.skew.never_selected_frac) << "\n";
  out << "selection_histogram=";
  for (std::size_t i = 0; i < r.skew.histogram.size(); ++i) {
    out << (i ? " " : "") << r.skew.histogram[i];
  }
  out << "\n";

  out << "\n[steps]\n";
  out << "step,dense,c1,c2,c3,recall\n";
  for (const auto& s : r.steps) {
    out << s.step << "," << (s.dense ? 1 : 0) << "," << s.c1 << "," << s.c2 << "," << s.c3 << ",";
    if (s.step >= 1 && s.step - 1 < r.recall.recall.size()) {
      out << format_real(r.recall.recall[s.step - 1]);
    }
    out << "\n";
  }

  if (r.error_profile) {
    out << "\n[error_profile]\n";
    out << "score=attention received in the previous iteration, deciles ascending\n";
    out << "skipped_zero_norm=" << r.error_profile->skipped_zero_norm << "\n";
    out << "bucket,samples,mean,stddev,cv\n";
    for (std::size_t b = 0; b < r.error_profile->buckets.size(); ++b) {
      const auto& e = r.error_profile->buckets[b];
      out << b << "," << e.samples << "," << format_real(e.mean) << "," << format_real(e.stddev)
          << "," << format_real(e.cv) << "\n";
    }
  }
  if (!r.similarity.empty()) {
    out << "\n[similarity_decay]\n";
    out << "lag,mean_cosine\n";
    for (std::size_t i = 0; i < r.similarity.size(); ++i) {
      out << i + 1 << "," << format_real(r.similarity[i]) << "\n";
    }
  }
}

void write_error_stub(std::ostream& out, ErrorCode code, const std::string& message) {
  out << "status=error\n";
  out << "error_code=" << error_code_name(code) << "\n";
  out << "message=" << message << "\n";
}

void write_compare_row(std::ostream& out, const RunReport& r) {
  const auto& pc = r.config.policy.config;
  out << policy_key(r.config.policy.kind) << "," << format_real(pc.cached_ratio) << ","
      << (r.config.policy.uses_speculation() ? pc.speculation_steps : 0) << ","
      << format_real(r.speedup) << "," << format_real(r.recall.mean()) << ","
      << format_real(r.fidelity.psnr) << "," << format_real(r.fidelity.mse) << ","
      << format_real(r.skew.top25_share) << "," << format_real(r.skew.never_selected_frac) << "\n";
}

void write_replay_csv(std::ostream& out, const TraceArchive& archive, const ReplayResult& replay) {
  out << kReplayHeader << "\n";
  for (std::size_t i = 0; i < replay.recall.steps.size(); ++i) {
    const std::size_t k = replay.recall.steps[i];
    out << k << "," << format_real(archive.steps[k].timestep) << ","
        << replay.selections[k].size() << "," << format_real(replay.recall.recall[i]) << ","
        << format_real(replay.recorded_recall.recall[i]) << "\n";
  }
}

}  // namespace specdiff

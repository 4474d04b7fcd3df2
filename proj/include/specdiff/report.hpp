// Copyright 2026 The specdiff-lab Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "specdiff/error.hpp"
#include "specdiff/experiment.hpp"

namespace specdiff {

/// Structured text: `key=value` lines grouped under `[section]` headers,
/// tables as CSV inside their section.
void write_report(std::ostream& out, const RunReport& report);

/// Machine-parsable error stub emitted on failure.
void write_error_stub(std::ostream& out, ErrorCode code, const std::string& message);

inline constexpr const char* kCompareHeader =
    "policy,cr,spec_steps,speedup_estimate,mean_recall,psnr_vs_dense,mse_vs_dense,top25_share,"
    "never_selected_frac";

void write_compare_row(std::ostream& out, const RunReport& report);

inline constexpr const char* kReplayHeader = "step,timestep,n_selected,recall,recorded_recall";

void write_replay_csv(std::ostream& out, const TraceArchive& archive, const ReplayResult& replay);

/// Fixed-format real used in every report and CSV.
std::string format_real(double value);

}  // namespace specdiff

// Copyright 2026 The specdiff-lab Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "specdiff/toy_dit.hpp"
#include "specdiff/trace.hpp"

namespace specdiff {

/// Dense S-step sample on the main run's initial noise. Keeps only the
/// per-step attention received (summed over layers); latents are dropped.
SpeculativeScoreTable speculative_prerun(const ToyDiTModel& model, const LatentState& init_noise,
                                         std::size_t speculation_steps);

/// Throws ErrorCode::kFormat when entries are not strictly decreasing or a
/// score vector has the wrong length or a negative entry.
void validate_table(const SpeculativeScoreTable& table, std::size_t n_tokens);

}  // namespace specdiff

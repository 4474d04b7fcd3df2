// Copyright 2026 The specdiff-lab Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#include "specdiff/speculation.hpp"

#include <string>

#include "specdiff/error.hpp"
#include "specdiff/importance.hpp"

namespace specdiff {

SpeculativeScoreTable speculative_prerun(const ToyDiTModel& model, const LatentState& init_noise,
                                         std::size_t speculation_steps) {
  require(speculation_steps >= 1, ErrorCode::kConfiguration,
          "speculative_prerun: speculation steps must be >= 1");
  const auto draft = sample_full(model, init_noise, make_schedule(speculation_steps));

  SpeculativeScoreTable table;
  table.entries.reserve(draft.archive.steps.size());
  for (const auto& step : draft.archive.steps) {
    SpeculativeEntry entry;
    entry.timestep = step.timestep;
    const auto summed = attention_received(step.trace);
    entry.scores.assign(summed.begin(), summed.end());
    table.entries.push_back(std::move(entry));
  }
  table.flops = draft.ledger.total();
  return table;
}

void validate_table(const SpeculativeScoreTable& table, std::size_t n_tokens) {
  for (std::size_t i = 0; i < table.entries.size(); ++i) {
    const auto& entry = table.entries[i];
    require(i == 0 || entry.timestep < table.entries[i - 1].timestep, ErrorCode::kFormat,
            "speculative table: timesteps not strictly decreasing at entry " + std::to_string(i));
    require(entry.scores.size() == n_tokens, ErrorCode::kFormat,
            "speculative table: entry " + std::to_string(i) + " has wrong token count");
    for (float s : entry.scores) {
      require(s >= 0.0f, ErrorCode::kFormat,
              "speculative table: negative score in entry " + std::to_string(i));
    }
  }
}

}  // namespace specdiff

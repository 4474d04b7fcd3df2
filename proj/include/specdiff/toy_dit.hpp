// Copyright 2026 The specdiff-lab Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "specdiff/flops.hpp"
#include "specdiff/matrix.hpp"
#include "specdiff/model_config.hpp"
#include "specdiff/trace.hpp"

namespace specdiff {

/// Rectified-flow timesteps T_0 = 1 > T_1 > ... > T_N = 0.
struct TimestepSchedule {
  std::vector<double> timesteps;

  std::size_t n_steps() const { return timesteps.empty() ? 0 : timesteps.size() - 1; }
  double operator[](std::size_t k) const { return timesteps[k]; }
};

/// Linear schedule T_k = 1 - k/N.
TimestepSchedule make_schedule(std::size_t n_steps);

/// Throws ErrorCode::kSchedule unless strictly decreasing from 1 to 0.
void validate_schedule(const TimestepSchedule& schedule);

struct LatentState {
  Matrix tokens;  // n_tokens x d_model
  std::size_t iteration = 0;
  double timestep = 1.0;
};

/// Standard normal latent drawn from `noise_seed`.
LatentState make_noise(const ModelConfig& config, std::uint64_t noise_seed);

struct LayerWeights {
  Matrix wq, wk, wv, wo;  // d x d
  Matrix ff_in;           // d_ff x d
  Matrix ff_out;          // d x d_ff
  std::vector<float> ln1_gain, ln1_bias;
  std::vector<float> ln2_gain, ln2_bias;
};

/// Pre-norm transformer over image tokens with additive timestep and 2D
/// positional embeddings. Immutable after construction.
class ToyDiTModel {
 public:
  explicit ToyDiTModel(const ModelConfig& config);

  const ModelConfig& config() const { return config_; }
  const std::vector<LayerWeights>& layers() const { return layers_; }
  const Matrix& positional() const { return positional_; }
  const Matrix& time_proj() const { return time_proj_; }
  const Matrix& out_proj() const { return out_proj_; }
  const std::vector<float>& final_gain() const { return final_gain_; }
  const std::vector<float>& final_bias() const { return final_bias_; }

  /// FNV-1a over every weight byte.
  std::uint64_t checksum() const;

 private:
  ModelConfig config_;
  std::vector<LayerWeights> layers_;
  Matrix positional_;  // n_tokens x d
  Matrix time_proj_;   // d x d
  Matrix out_proj_;    // d x d
  std::vector<float> final_gain_, final_bias_;
};

ToyDiTModel init_model(const ModelConfig& config);

/// Per-layer keys/values of every token as of the step that last computed it.
struct KvSnapshots {
  std::vector<Matrix> keys;    // per layer, n_tokens x d
  std::vector<Matrix> values;  // per layer, n_tokens x d
  std::vector<std::vector<std::uint8_t>> valid;

  static KvSnapshots empty(const ModelConfig& config);
  bool complete() const;
};

struct ForwardOutput {
  std::vector<TokenId> tokens;  // ascending query ids
  Matrix velocities;            // tokens.size() x d_model, row i belongs to tokens[i]
  AttentionTrace trace;
};

/// Partial forward: only `query_set` tokens run projections and the FFN and
/// refresh their snapshot entries; every query attends over all keys, stale
/// snapshots included. `query_set` must be ascending and unique.
ForwardOutput forward(const ToyDiTModel& model, const Matrix& latent, double timestep,
                      std::span<const TokenId> query_set, KvSnapshots& kv);

/// Unmasked forward over all tokens. Optionally returns the fresh snapshots.
ForwardOutput forward_dense(const ToyDiTModel& model, const Matrix& latent, double timestep,
                            KvSnapshots* kv_out = nullptr);

/// x += (t_next - t_now) * v, elementwise in float.
void euler_update(Matrix& latent, const Matrix& velocity, double t_now, double t_next);

/// Throws ErrorCode::kNumericDivergence naming `step` on any non-finite entry.
void check_finite(const Matrix& m, std::size_t step, const char* what);

struct SampleResult {
  LatentState final_state;
  TraceArchive archive;
  FlopLedger ledger;
};

/// Dense Euler sampling over the whole schedule, recording every step.
SampleResult sample_full(const ToyDiTModel& model, const LatentState& init_noise,
                         const TimestepSchedule& schedule);

/// Empty archive with dims and schedule filled in.
TraceArchive make_archive_header(const ModelConfig& config, const TimestepSchedule& schedule);

}  // namespace specdiff

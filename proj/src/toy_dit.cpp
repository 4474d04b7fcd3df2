// Copyright 2026 The specdiff-lab Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#include "specdiff/toy_dit.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numbers>
#include <random>
#include <string>

#include "specdiff/error.hpp"

namespace specdiff {

namespace {

constexpr float kLayerNormEps = 1e-5f;

// Uniform in [-range, range) from the top 53 bits of a 64-bit draw.
float draw_uniform(std::mt19937_64& rng, float range) {
  const double unit = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return static_cast<float>((2.0 * unit - 1.0) * range);
}

Matrix random_matrix(std::mt19937_64& rng, std::size_t rows, std::size_t cols, float range) {
  Matrix m(rows, cols);
  for (auto& x : m.flat()) x = draw_uniform(rng, range);
  return m;
}

void layer_norm(std::span<const float> in, const std::vector<float>& gain,
                const std::vector<float>& bias, std::span<float> out) {
  double mean = 0.0;
  for (float x : in) mean += x;
  mean /= static_cast<double>(in.size());
  double var = 0.0;
  for (float x : in) var += (x - mean) * (x - mean);
  var /= static_cast<double>(in.size());
  const float inv = static_cast<float>(1.0 / std::sqrt(var + kLayerNormEps));
  const float mu = static_cast<float>(mean);
  for (std::size_t i = 0; i < in.size(); ++i) {
    out[i] = (in[i] - mu) * inv * gain[i] + bias[i];
  }
}

// y = W x
void matvec(const Matrix& w, std::span<const float> x, std::span<float> y) {
  for (std::size_t o = 0; o < w.rows(); ++o) {
    const auto row = w.row(o);
    float acc = 0.0f;
    for (std::size_t i = 0; i < row.size(); ++i) acc += row[i] * x[i];
    y[o] = acc;
  }
}

float gelu(float x) {
  constexpr float kC = 0.7978845608028654f;  // sqrt(2/pi)
  return 0.5f * x * (1.0f + std::tanh(kC * (x + 0.044715f * x * x * x)));
}

void sinusoid(double position, std::size_t width, std::span<float> out) {
  const std::size_t half = width / 2;
  for (std::size_t i = 0; i < half; ++i) {
    const double freq = std::exp(-std::log(10000.0) * static_cast<double>(i) / static_cast<double>(half));
    out[i] = static_cast<float>(std::sin(position * freq));
    out[half + i] = static_cast<float>(std::cos(position * freq));
  }
  if (width % 2 == 1) out[width - 1] = 0.0f;
}

Matrix positional_table(const ModelConfig& config) {
  const std::size_t side = config.grid_side();
  const std::size_t d = config.d_model;
  const std::size_t half = d / 2;
  Matrix pos(config.n_tokens, d);
  std::vector<float> buf(d);
  for (std::size_t t = 0; t < config.n_tokens; ++t) {
    auto row = pos.row(t);
    sinusoid(static_cast<double>(t / side), half, std::span(buf).first(half));
    std::copy_n(buf.begin(), half, row.begin());
    sinusoid(static_cast<double>(t % side), d - half, std::span(buf).first(d - half));
    std::copy_n(buf.begin(), d - half, row.begin() + static_cast<std::ptrdiff_t>(half));
  }
  return pos;
}

std::vector<float> time_embedding(const ToyDiTModel& model, double timestep) {
  const std::size_t d = model.config().d_model;
  std::vector<float> raw(d), out(d);
  // T in [0, 1], unscaled.
  sinusoid(timestep, d, raw);
  matvec(model.time_proj(), raw, out);
  return out;
}

// Token hidden states entering the first block.
void embed_rows(const ToyDiTModel& model, const Matrix& latent, std::span<const TokenId> tokens,
                const std::vector<float>& temb, Matrix& hidden) {
  const auto& pos = model.positional();
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const auto x = latent.row(tokens[i]);
    const auto p = pos.row(tokens[i]);
    auto h = hidden.row(i);
    for (std::size_t c = 0; c < h.size(); ++c) h[c] = x[c] + p[c] + temb[c];
  }
}

// One transformer block for the given query rows. `hidden` holds one row per
// query token. Keys/values of the queries are written into `keys`/`values`
// before any attention is evaluated, so queries see each other's fresh keys.
void run_block(const ModelConfig& config, const LayerWeights& w, std::span<const TokenId> tokens,
               Matrix& hidden, Matrix& keys, Matrix& values, std::span<float> received) {
  const std::size_t d = config.d_model;
  const std::size_t n = config.n_tokens;
  const std::size_t heads = config.n_heads;
  const std::size_t hd = config.head_dim();
  const float scale = 1.0f / std::sqrt(static_cast<float>(hd));

  Matrix queries(tokens.size(), d);
  std::vector<float> normed(d);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    layer_norm(hidden.row(i), w.ln1_gain, w.ln1_bias, normed);
    matvec(w.wq, normed, queries.row(i));
    matvec(w.wk, normed, keys.row(tokens[i]));
    matvec(w.wv, normed, values.row(tokens[i]));
  }

  std::vector<double> mass(n, 0.0);
  std::vector<float> logits(n), mixed(d), projected(d), ff_hidden(config.d_ff);
  const double head_weight = 1.0 / static_cast<double>(heads);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const auto q = queries.row(i);
    for (std::size_t h = 0; h < heads; ++h) {
      const std::size_t off = h * hd;
      float peak = -std::numeric_limits<float>::infinity();
      for (std::size_t j = 0; j < n; ++j) {
        const auto k = keys.row(j);
        float dot = 0.0f;
        for (std::size_t c = 0; c < hd; ++c) dot += q[off + c] * k[off + c];
        logits[j] = dot * scale;
        peak = std::max(peak, logits[j]);
      }
      double denom = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        logits[j] = std::exp(logits[j] - peak);
        denom += logits[j];
      }
      const float inv = static_cast<float>(1.0 / denom);
      std::fill_n(mixed.begin() + static_cast<std::ptrdiff_t>(off), hd, 0.0f);
      for (std::size_t j = 0; j < n; ++j) {
        const float p = logits[j] * inv;
        mass[j] += static_cast<double>(p) * head_weight;
        const auto v = values.row(j);
        for (std::size_t c = 0; c < hd; ++c) mixed[off + c] += p * v[off + c];
      }
    }
    auto row = hidden.row(i);
    matvec(w.wo, mixed, projected);
    for (std::size_t c = 0; c < d; ++c) row[c] += projected[c];

    layer_norm(row, w.ln2_gain, w.ln2_bias, normed);
    matvec(w.ff_in, normed, ff_hidden);
    for (auto& x : ff_hidden) x = gelu(x);
    matvec(w.ff_out, ff_hidden, projected);
    for (std::size_t c = 0; c < d; ++c) row[c] += projected[c];
  }
  for (std::size_t j = 0; j < n; ++j) received[j] = static_cast<float>(mass[j]);
}

ForwardOutput run_forward(const ToyDiTModel& model, const Matrix& latent, double timestep,
                          std::span<const TokenId> tokens, KvSnapshots& kv) {
  const auto& config = model.config();
  const std::size_t d = config.d_model;

  ForwardOutput out;
  out.tokens.assign(tokens.begin(), tokens.end());
  out.trace.received = Matrix(config.n_layers, config.n_tokens);
  out.trace.computed.assign(config.n_tokens, 0);
  for (TokenId t : tokens) out.trace.computed[t] = 1;

  Matrix hidden(tokens.size(), d);
  embed_rows(model, latent, tokens, time_embedding(model, timestep), hidden);
  for (std::size_t l = 0; l < config.n_layers; ++l) {
    run_block(config, model.layers()[l], tokens, hidden, kv.keys[l], kv.values[l],
              out.trace.received.row(l));
    for (TokenId t : tokens) kv.valid[l][t] = 1;
  }

  out.velocities = Matrix(tokens.size(), d);
  std::vector<float> normed(d);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    layer_norm(hidden.row(i), model.final_gain(), model.final_bias(), normed);
    matvec(model.out_proj(), normed, out.velocities.row(i));
  }
  return out;
}

}  // namespace

void ModelConfig::validate() const {
  require(n_layers >= 1 && n_heads >= 1 && d_model >= 1 && d_ff >= 1, ErrorCode::kConfiguration,
          "model config: all dimensions must be >= 1");
  require(d_model % n_heads == 0, ErrorCode::kConfiguration,
          "model config: d_model (" + std::to_string(d_model) + ") not divisible by n_heads (" +
              std::to_string(n_heads) + ")");
  require(n_tokens >= 4, ErrorCode::kConfiguration, "model config: n_tokens must be >= 4");
  const std::size_t side = grid_side();
  require(side * side == n_tokens, ErrorCode::kConfiguration,
          "model config: n_tokens (" + std::to_string(n_tokens) + ") is not a square grid");
  require(std::isfinite(qk_gain) && qk_gain > 0.0f, ErrorCode::kConfiguration,
          "model config: qk_gain must be positive");
}

std::size_t ModelConfig::grid_side() const {
  auto side = static_cast<std::size_t>(std::sqrt(static_cast<double>(n_tokens)));
  while (side * side > n_tokens) --side;
  while ((side + 1) * (side + 1) <= n_tokens) ++side;
  return side;
}

TimestepSchedule make_schedule(std::size_t n_steps) {
  require(n_steps >= 1, ErrorCode::kConfiguration, "make_schedule: n_steps must be >= 1");
  TimestepSchedule schedule;
  schedule.timesteps.resize(n_steps + 1);
  for (std::size_t k = 0; k <= n_steps; ++k) {
    schedule.timesteps[k] = 1.0 - static_cast<double>(k) / static_cast<double>(n_steps);
  }
  schedule.timesteps[n_steps] = 0.0;
  return schedule;
}

void validate_schedule(const TimestepSchedule& schedule) {
  const auto& t = schedule.timesteps;
  require(t.size() >= 2, ErrorCode::kSchedule, "schedule: needs at least two timesteps");
  require(t.front() == 1.0 && t.back() == 0.0, ErrorCode::kSchedule,
          "schedule: must run from 1.0 to 0.0");
  for (std::size_t k = 1; k < t.size(); ++k) {
    require(t[k] < t[k - 1], ErrorCode::kSchedule,
            "schedule: not strictly decreasing at index " + std::to_string(k));
  }
}

LatentState make_noise(const ModelConfig& config, std::uint64_t noise_seed) {
  config.validate();
  std::mt19937_64 rng(noise_seed ^ 0x9e3779b97f4a7c15ULL);
  LatentState state;
  state.tokens = Matrix(config.n_tokens, config.d_model);
  auto flat = state.tokens.flat();
  // Box-Muller over raw 53-bit draws.
  for (std::size_t i = 0; i < flat.size(); i += 2) {
    const double u1 = (static_cast<double>(rng() >> 11) + 1.0) * 0x1.0p-53;
    const double u2 = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    flat[i] = static_cast<float>(r * std::cos(a));
    if (i + 1 < flat.size()) flat[i + 1] = static_cast<float>(r * std::sin(a));
  }
  return state;
}

ToyDiTModel::ToyDiTModel(const ModelConfig& config) : config_(config) {
  config_.validate();
  std::mt19937_64 rng(config_.seed);
  const std::size_t d = config_.d_model;
  const float range_d = 1.0f / std::sqrt(static_cast<float>(d));
  const float range_ff = 1.0f / std::sqrt(static_cast<float>(config_.d_ff));

  layers_.resize(config_.n_layers);
  for (auto& layer : layers_) {
    layer.wq = random_matrix(rng, d, d, range_d * config_.qk_gain);
    layer.wk = random_matrix(rng, d, d, range_d * config_.qk_gain);
    layer.wv = random_matrix(rng, d, d, range_d);
    layer.wo = random_matrix(rng, d, d, range_d);
    layer.ff_in = random_matrix(rng, config_.d_ff, d, range_d);
    layer.ff_out = random_matrix(rng, d, config_.d_ff, range_ff);
    layer.ln1_gain.assign(d, 1.0f);
    layer.ln1_bias.assign(d, 0.0f);
    layer.ln2_gain.assign(d, 1.0f);
    layer.ln2_bias.assign(d, 0.0f);
  }
  positional_ = positional_table(config_);
  time_proj_ = random_matrix(rng, d, d, range_d);
  out_proj_ = random_matrix(rng, d, d, range_d);
  final_gain_.assign(d, 1.0f);
  final_bias_.assign(d, 0.0f);
}

std::uint64_t ToyDiTModel::checksum() const {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  auto mix = [&hash](std::span<const float> values) {
    for (float v : values) {
      std::uint32_t bits = 0;
      std::memcpy(&bits, &v, sizeof bits);
      for (int b = 0; b < 4; ++b) {
        hash ^= (bits >> (8 * b)) & 0xffu;
        hash *= 0x100000001b3ULL;
      }
    }
  };
  for (const auto& layer : layers_) {
    for (const Matrix* m : {&layer.wq, &layer.wk, &layer.wv, &layer.wo, &layer.ff_in, &layer.ff_out}) {
      mix(m->flat());
    }
    mix(layer.ln1_gain);
    mix(layer.ln1_bias);
    mix(layer.ln2_gain);
    mix(layer.ln2_bias);
  }
  mix(positional_.flat());
  mix(time_proj_.flat());
  mix(out_proj_.flat());
  mix(final_gain_);
  mix(final_bias_);
  return hash;
}

ToyDiTModel init_model(const ModelConfig& config) { return ToyDiTModel(config); }

KvSnapshots KvSnapshots::empty(const ModelConfig& config) {
  KvSnapshots kv;
  kv.keys.assign(config.n_layers, Matrix(config.n_tokens, config.d_model));
  kv.values.assign(config.n_layers, Matrix(config.n_tokens, config.d_model));
  kv.valid.assign(config.n_layers, std::vector<std::uint8_t>(config.n_tokens, 0));
  return kv;
}

bool KvSnapshots::complete() const {
  if (valid.empty()) return false;
  return std::all_of(valid.begin(), valid.end(), [](const auto& layer) {
    return std::all_of(layer.begin(), layer.end(), [](std::uint8_t v) { return v != 0; });
  });
}

ForwardOutput forward(const ToyDiTModel& model, const Matrix& latent, double timestep,
                      std::span<const TokenId> query_set, KvSnapshots& kv) {
  const auto& config = model.config();
  require(!query_set.empty(), ErrorCode::kInvalidArgument, "forward: empty query set");
  require(latent.rows() == config.n_tokens && latent.cols() == config.d_model,
          ErrorCode::kInvalidArgument, "forward: latent shape does not match the model");
  for (std::size_t i = 0; i < query_set.size(); ++i) {
    require(query_set[i] < config.n_tokens, ErrorCode::kInvalidArgument,
            "forward: token id " + std::to_string(query_set[i]) + " out of range");
    require(i == 0 || query_set[i] > query_set[i - 1], ErrorCode::kInvalidArgument,
            "forward: query set must be ascending and unique");
  }
  require(kv.keys.size() == config.n_layers && kv.values.size() == config.n_layers &&
              kv.valid.size() == config.n_layers,
          ErrorCode::kCacheIntegrity, "forward: snapshot layer count mismatch");

  // Every non-query token must already hold a snapshot at every layer.
  std::vector<std::uint8_t> is_query(config.n_tokens, 0);
  for (TokenId t : query_set) is_query[t] = 1;
  for (std::size_t l = 0; l < config.n_layers; ++l) {
    for (std::size_t t = 0; t < config.n_tokens; ++t) {
      if (!is_query[t] && !kv.valid[l][t]) {
        fail(ErrorCode::kCacheIntegrity, "forward: missing snapshot for token " +
                                             std::to_string(t) + " at layer " + std::to_string(l));
      }
    }
  }
  return run_forward(model, latent, timestep, query_set, kv);
}

ForwardOutput forward_dense(const ToyDiTModel& model, const Matrix& latent, double timestep,
                            KvSnapshots* kv_out) {
  const auto& config = model.config();
  require(latent.rows() == config.n_tokens && latent.cols() == config.d_model,
          ErrorCode::kInvalidArgument, "forward_dense: latent shape does not match the model");
  std::vector<TokenId> all(config.n_tokens);
  for (std::size_t t = 0; t < all.size(); ++t) all[t] = static_cast<TokenId>(t);
  KvSnapshots kv = KvSnapshots::empty(config);
  auto out = run_forward(model, latent, timestep, all, kv);
  if (kv_out != nullptr) *kv_out = std::move(kv);
  return out;
}

void euler_update(Matrix& latent, const Matrix& velocity, double t_now, double t_next) {
  require(latent.rows() == velocity.rows() && latent.cols() == velocity.cols(),
          ErrorCode::kInvalidArgument, "euler_update: shape mismatch");
  const float dt = static_cast<float>(t_next - t_now);
  auto x = latent.flat();
  const auto v = velocity.flat();
  for (std::size_t i = 0; i < x.size(); ++i) x[i] += dt * v[i];
}

void check_finite(const Matrix& m, std::size_t step, const char* what) {
  for (float x : m.flat()) {
    if (!std::isfinite(x)) {
      fail(ErrorCode::kNumericDivergence,
           std::string("non-finite ") + what + " at step " + std::to_string(step));
    }
  }
}

TraceArchive make_archive_header(const ModelConfig& config, const TimestepSchedule& schedule) {
  TraceArchive archive;
  archive.n_layers = static_cast<std::uint32_t>(config.n_layers);
  archive.n_tokens = static_cast<std::uint32_t>(config.n_tokens);
  archive.d_model = static_cast<std::uint32_t>(config.d_model);
  archive.schedule.reserve(schedule.timesteps.size());
  for (double t : schedule.timesteps) archive.schedule.push_back(static_cast<float>(t));
  return archive;
}

SampleResult sample_full(const ToyDiTModel& model, const LatentState& init_noise,
                         const TimestepSchedule& schedule) {
  validate_schedule(schedule);
  const auto& config = model.config();
  SampleResult result;
  result.archive = make_archive_header(config, schedule);
  result.final_state = init_noise;
  Matrix& x = result.final_state.tokens;
  check_finite(x, 0, "initial latent");

  for (std::size_t k = 0; k < schedule.n_steps(); ++k) {
    auto out = forward_dense(model, x, schedule[k]);
    check_finite(out.velocities, k, "velocity");
    result.ledger.add_step(dense_step_flops(config));

    StepRecord record;
    record.step = static_cast<std::uint32_t>(k);
    record.timestep = static_cast<float>(schedule[k]);
    record.trace = std::move(out.trace);
    record.outputs = out.velocities;
    result.archive.steps.push_back(std::move(record));

    euler_update(x, out.velocities, schedule[k], schedule[k + 1]);
    check_finite(x, k, "latent");
  }
  result.final_state.iteration = schedule.n_steps();
  result.final_state.timestep = schedule.timesteps.back();
  result.archive.final_latent = x;
  return result;
}

}  // namespace specdiff

// Copyright 2026 The specdiff-lab Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#include "specdiff/trace_archive.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>

#include "specdiff/error.hpp"

namespace specdiff {

namespace {

class ByteWriter {
 public:
  void u8(std::uint8_t v) { bytes_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void f32s(std::span<const float> vs) {
    for (float v : vs) f32(v);
  }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

  [[noreturn]] void error(const std::string& what) const {
    fail(ErrorCode::kFormat, "archive: " + what + " at byte offset " + std::to_string(pos_));
  }

  void need(std::size_t n, const char* what) const {
    if (remaining() < n) {
      error(std::string("truncated ") + what + " (need " + std::to_string(n) + " bytes, have " +
            std::to_string(remaining()) + ")");
    }
  }

  std::uint8_t u8(const char* what) {
    need(1, what);
    return bytes_[pos_++];
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64(const char* what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
  }
  float f32(const char* what) { return std::bit_cast<float>(u32(what)); }
  void f32s(std::span<float> out, const char* what) {
    need(out.size() * 4, what);
    for (auto& v : out) v = f32(what);
  }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

std::size_t bitmap_bytes(std::size_t n_tokens) { return (n_tokens + 7) / 8; }

}  // namespace

void validate_archive(const TraceArchive& a) {
  auto check = [](bool ok, const std::string& what) {
    require(ok, ErrorCode::kFormat, "archive: " + what);
  };
  check(a.n_layers >= 1 && a.n_tokens >= 1 && a.d_model >= 1, "zero dimension in header");
  check(a.schedule.size() == a.steps.size() + 1, "schedule length does not match step count");
  for (std::size_t k = 0; k < a.steps.size(); ++k) {
    const auto& s = a.steps[k];
    const std::string at = " in record " + std::to_string(k);
    check(s.step == k, "step index mismatch" + at);
    check(s.trace.received.rows() == a.n_layers && s.trace.received.cols() == a.n_tokens,
          "attention dims differ from header" + at);
    check(s.trace.computed.size() == a.n_tokens, "bitmap length differs from header" + at);
    check(s.outputs.rows() == a.n_tokens && s.outputs.cols() == a.d_model,
          "output dims differ from header" + at);
  }
  check(a.final_latent.rows() == a.n_tokens && a.final_latent.cols() == a.d_model,
        "final latent dims differ from header");
  if (a.speculation) {
    for (const auto& e : a.speculation->entries) {
      check(e.scores.size() == a.n_tokens, "speculative entry length differs from header");
    }
  }
}

std::vector<std::uint8_t> encode_archive(const TraceArchive& archive) {
  validate_archive(archive);
  ByteWriter w;
  for (char c : kArchiveMagic) w.u8(static_cast<std::uint8_t>(c));
  w.u32(kArchiveVersion);
  w.u32(archive.n_steps());
  w.u32(archive.n_layers);
  w.u32(archive.n_tokens);
  w.u32(archive.d_model);
  w.f32s(archive.schedule);
  for (const auto& step : archive.steps) {
    w.u32(step.step);
    w.f32(step.timestep);
    for (std::size_t b = 0; b < bitmap_bytes(archive.n_tokens); ++b) {
      std::uint8_t byte = 0;
      for (std::size_t bit = 0; bit < 8; ++bit) {
        const std::size_t t = b * 8 + bit;
        if (t < archive.n_tokens && step.trace.computed[t]) byte |= static_cast<std::uint8_t>(1u << bit);
      }
      w.u8(byte);
    }
    w.f32s(step.trace.received.flat());
    w.f32s(step.outputs.flat());
  }
  w.f32s(archive.final_latent.flat());
  const auto spec_entries =
      archive.speculation ? static_cast<std::uint32_t>(archive.speculation->entries.size()) : 0u;
  w.u32(spec_entries);
  if (spec_entries > 0) {
    w.u64(archive.speculation->flops);
    for (const auto& entry : archive.speculation->entries) {
      w.f32(entry.timestep);
      w.f32s(entry.scores);
    }
  }
  return w.take();
}

TraceArchive decode_archive(std::span<const std::uint8_t> bytes, const ArchiveLimits& limits) {
  ByteReader r(bytes);
  r.need(4, "magic");
  if (std::memcmp(bytes.data(), kArchiveMagic, 4) != 0) r.error("bad magic");
  for (int i = 0; i < 4; ++i) r.u8("magic");
  const std::size_t version_offset = r.offset();
  const auto version = r.u32("version");
  if (version != kArchiveVersion) {
    fail(ErrorCode::kUnsupportedVersion, "archive: unsupported version " + std::to_string(version) +
                                             " at byte offset " + std::to_string(version_offset));
  }

  TraceArchive a;
  const auto n_steps = r.u32("n_steps");
  a.n_layers = r.u32("n_layers");
  a.n_tokens = r.u32("n_tokens");
  a.d_model = r.u32("d_model");
  if (n_steps > limits.max_steps || a.n_layers == 0 || a.n_layers > limits.max_layers ||
      a.n_tokens == 0 || a.n_tokens > limits.max_tokens || a.d_model == 0 ||
      a.d_model > limits.max_d_model) {
    r.error("header dimensions out of range");
  }
  const std::size_t n = a.n_tokens;
  const std::size_t record_bytes =
      8 + bitmap_bytes(n) + 4 * (static_cast<std::size_t>(a.n_layers) * n + n * a.d_model);
  // Reject impossible sizes before allocating anything large.
  r.need(4 * (static_cast<std::size_t>(n_steps) + 1) + record_bytes * n_steps + 4 * n * a.d_model + 4,
         "archive body");

  a.schedule.resize(n_steps + 1);
  r.f32s(a.schedule, "schedule");
  a.steps.resize(n_steps);
  for (std::uint32_t k = 0; k < n_steps; ++k) {
    auto& s = a.steps[k];
    s.step = r.u32("step index");
    if (s.step != k) r.error("record " + std::to_string(k) + " has step index " + std::to_string(s.step));
    s.timestep = r.f32("timestep");
    if (std::bit_cast<std::uint32_t>(s.timestep) != std::bit_cast<std::uint32_t>(a.schedule[k])) {
      r.error("record " + std::to_string(k) + " timestep disagrees with schedule");
    }
    s.trace.computed.assign(n, 0);
    for (std::size_t b = 0; b < bitmap_bytes(n); ++b) {
      const auto byte = r.u8("bitmap");
      for (std::size_t bit = 0; bit < 8; ++bit) {
        const std::size_t t = b * 8 + bit;
        const bool set = (byte >> bit) & 1u;
        if (t >= n) {
          if (set) r.error("bitmap padding bit set in record " + std::to_string(k));
          continue;
        }
        s.trace.computed[t] = set ? 1 : 0;
      }
    }
    s.trace.received = Matrix(a.n_layers, n);
    r.f32s(s.trace.received.flat(), "attention");
    s.outputs = Matrix(n, a.d_model);
    r.f32s(s.outputs.flat(), "outputs");
  }
  a.final_latent = Matrix(n, a.d_model);
  r.f32s(a.final_latent.flat(), "final latent");
  const auto spec_entries = r.u32("speculation count");
  if (spec_entries > 0) {
    if (spec_entries > limits.max_steps) r.error("speculation count out of range");
    r.need(8 + static_cast<std::size_t>(spec_entries) * 4 * (n + 1), "speculation table");
    SpeculativeScoreTable table;
    table.flops = r.u64("speculation flops");
    table.entries.resize(spec_entries);
    for (auto& entry : table.entries) {
      entry.timestep = r.f32("speculation timestep");
      entry.scores.resize(n);
      r.f32s(entry.scores, "speculation scores");
    }
    a.speculation = std::move(table);
  }
  if (r.remaining() != 0) r.error(std::to_string(r.remaining()) + " trailing bytes");
  return a;
}

void write_archive(const std::filesystem::path& path, const TraceArchive& archive) {
  const auto bytes = encode_archive(archive);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), ErrorCode::kIo, "cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  require(static_cast<bool>(out), ErrorCode::kIo, "write to '" + path.string() + "' failed");
}

TraceArchive read_archive(const std::filesystem::path& path, const ArchiveLimits& limits) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::kIo, "cannot open '" + path.string() + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_archive(bytes, limits);
}

void write_archive_csv(std::ostream& out, const TraceArchive& archive) {
  validate_archive(archive);
  std::ostringstream line;
  line << "step,token,timestep,computed";
  for (std::uint32_t l = 0; l < archive.n_layers; ++l) line << ",attn_l" << l;
  for (std::uint32_t c = 0; c < archive.d_model; ++c) line << ",out_" << c;
  out << line.str() << '\n';
  out << std::setprecision(9);
  for (const auto& step : archive.steps) {
    for (std::uint32_t t = 0; t < archive.n_tokens; ++t) {
      out << step.step << ',' << t << ',' << step.timestep << ','
          << static_cast<int>(step.trace.computed[t]);
      for (std::uint32_t l = 0; l < archive.n_layers; ++l) out << ',' << step.trace.received(l, t);
      for (float v : step.outputs.row(t)) out << ',' << v;
      out << '\n';
    }
  }
}

}  // namespace specdiff

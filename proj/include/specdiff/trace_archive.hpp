// Copyright 2026 The specdiff-lab Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "specdiff/trace.hpp"

namespace specdiff {

// SPDT layout, all fields little-endian, reals are IEEE-754 binary32:
//
//   char[4] magic "SPDT" | u32 version (1)
//   u32 n_steps | u32 n_layers | u32 n_tokens | u32 d_model
//   f32 schedule[n_steps + 1]
//   n_steps records:
//     u32 step | f32 timestep | u8 computed_bitmap[ceil(n_tokens / 8)] (LSB first)
//     f32 attention[n_layers][n_tokens] | f32 outputs[n_tokens][d_model]
//   f32 final_latent[n_tokens][d_model]
//   u32 spec_entries
//   if spec_entries > 0: u64 spec_flops, then per entry f32 timestep, f32 scores[n_tokens]
inline constexpr char kArchiveMagic[4] = {'S', 'P', 'D', 'T'};
inline constexpr std::uint32_t kArchiveVersion = 1;

struct ArchiveLimits {
  std::uint32_t max_steps = 100000;
  std::uint32_t max_layers = 1024;
  std::uint32_t max_tokens = 1u << 20;
  std::uint32_t max_d_model = 1u << 16;
};

/// Throws ErrorCode::kFormat when record dims disagree with the header.
void validate_archive(const TraceArchive& archive);

std::vector<std::uint8_t> encode_archive(const TraceArchive& archive);

/// Errors carry the byte offset where decoding failed: kFormat for
/// truncation or inconsistent content, kUnsupportedVersion for version != 1.
TraceArchive decode_archive(std::span<const std::uint8_t> bytes, const ArchiveLimits& limits = {});

void write_archive(const std::filesystem::path& path, const TraceArchive& archive);
TraceArchive read_archive(const std::filesystem::path& path, const ArchiveLimits& limits = {});

/// One row per (step, token): step,token,timestep,computed,attn_l*,out_*.
void write_archive_csv(std::ostream& out, const TraceArchive& archive);

}  // namespace specdiff

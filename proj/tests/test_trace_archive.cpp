// Copyright 2026 The specdiff-lab Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#include <cstring>
#include <filesystem>
#include <sstream>

#include "doctest.h"
#include "specdiff/baselines.hpp"
#include "specdiff/cache_engine.hpp"
#include "specdiff/speculation.hpp"
#include "specdiff/trace_archive.hpp"
#include "test_support.hpp"

using namespace specdiff;
using namespace specdiff::testing;

namespace {

TraceArchive tiny_archive(std::size_t steps, bool with_table) {
  const auto c = tiny_config(1);
  const auto model = init_model(c);
  const auto noise = make_noise(c, 0);
  if (!with_table) return sample_full(model, noise, make_schedule(steps)).archive;
  Policy p;
  p.config.cached_ratio = 0.5;
  const auto table = speculative_prerun(model, noise, 2);
  return cached_sample(model, noise, make_schedule(steps), p, &table).archive;
}

std::uint32_t read_u32(const std::vector<std::uint8_t>& b, std::size_t at) {
  return static_cast<std::uint32_t>(b[at]) | static_cast<std::uint32_t>(b[at + 1]) << 8 |
         static_cast<std::uint32_t>(b[at + 2]) << 16 | static_cast<std::uint32_t>(b[at + 3]) << 24;
}

void put_u32(std::vector<std::uint8_t>& b, std::size_t at, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b[at + i] = static_cast<std::uint8_t>(v >> (8 * i));
}

std::string decode_message(const std::vector<std::uint8_t>& bytes) {
  try {
    decode_archive(bytes);
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("header layout is little-endian with the documented fields") {
  const auto a = tiny_archive(3, false);
  const auto b = encode_archive(a);
  CHECK(std::memcmp(b.data(), "SPDT", 4) == 0);
  CHECK(read_u32(b, 4) == 1);
  CHECK(read_u32(b, 8) == 3);
  CHECK(read_u32(b, 12) == 1);
  CHECK(read_u32(b, 16) == 16);
  CHECK(read_u32(b, 20) == 16);
  float first = 0;
  std::memcpy(&first, b.data() + 24, 4);
  CHECK(first == 1.0f);
  // header 24, schedule 16, records 3 * (8 + 2 + 64 + 1024), latent 1024, count 4
  CHECK(b.size() == 24 + 16 + 3 * (8 + 2 + 4 * 16 + 4 * 256) + 4 * 256 + 4);
}

TEST_CASE("write-read-write is byte identical") {
  for (const auto& a : {tiny_archive(1, false), tiny_archive(28, false), tiny_archive(6, true)}) {
    const auto first = encode_archive(a);
    const auto back = decode_archive(first);
    CHECK(encode_archive(back) == first);
    CHECK(bitwise_equal(back.final_latent, a.final_latent));
    CHECK(back.speculation.has_value() == a.speculation.has_value());
  }
  const auto dir = std::filesystem::temp_directory_path() / "specdiff_archive_test";
  std::filesystem::create_directories(dir);
  const auto a = tiny_archive(4, true);
  write_archive(dir / "a.spdt", a);
  CHECK(encode_archive(read_archive(dir / "a.spdt")) == encode_archive(a));
  CHECK(thrown_code([&] { read_archive(dir / "missing.spdt"); }) == code_of(ErrorCode::kIo));
  std::filesystem::remove_all(dir);
}

TEST_CASE("every truncation is a format error") {
  const auto bytes = encode_archive(tiny_archive(2, true));
  for (std::size_t cut = 0; cut < bytes.size(); ++cut) {
    const std::vector<std::uint8_t> part(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(cut));
    REQUIRE(thrown_code([&] { decode_archive(part); }) == code_of(ErrorCode::kFormat));
  }
}

TEST_CASE("version, magic and trailing bytes") {
  auto bytes = encode_archive(tiny_archive(2, false));
  auto v2 = bytes;
  put_u32(v2, 4, 2);
  CHECK(thrown_code([&] { decode_archive(v2); }) == code_of(ErrorCode::kUnsupportedVersion));
  CHECK(decode_message(v2).find("byte offset 4") != std::string::npos);
  auto magic = bytes;
  magic[0] = 'X';
  CHECK(thrown_code([&] { decode_archive(magic); }) == code_of(ErrorCode::kFormat));
  auto longer = bytes;
  longer.push_back(0);
  CHECK(thrown_code([&] { decode_archive(longer); }) == code_of(ErrorCode::kFormat));
  CHECK(decode_message(longer).find("trailing") != std::string::npos);
}

TEST_CASE("corrupt records are rejected with their offset") {
  const auto bytes = encode_archive(tiny_archive(2, false));
  const std::size_t first_record = 24 + 4 * 3;
  auto step = bytes;
  put_u32(step, first_record, 7);
  CHECK(thrown_code([&] { decode_archive(step); }) == code_of(ErrorCode::kFormat));
  CHECK(decode_message(step).find("byte offset " + std::to_string(first_record + 4)) != std::string::npos);

  auto time = bytes;
  time[first_record + 4] ^= 0x01;
  CHECK(thrown_code([&] { decode_archive(time); }) == code_of(ErrorCode::kFormat));

  auto huge = bytes;
  put_u32(huge, 16, 1u << 30);
  CHECK(thrown_code([&] { decode_archive(huge); }) == code_of(ErrorCode::kFormat));
  auto zero = bytes;
  put_u32(zero, 12, 0);
  CHECK(thrown_code([&] { decode_archive(zero); }) == code_of(ErrorCode::kFormat));
}

TEST_CASE("bitmap padding bits must be clear") {
  ModelConfig c = tiny_config(1);
  c.n_tokens = 9;
  c.d_model = 4;
  c.n_heads = 1;
  const auto a = sample_full(init_model(c), make_noise(c, 0), make_schedule(1)).archive;
  auto bytes = encode_archive(a);
  const std::size_t bitmap = 24 + 8 + 8;
  CHECK(bytes[bitmap] == 0xff);
  CHECK(bytes[bitmap + 1] == 0x01);
  bytes[bitmap + 1] |= 0x80;
  CHECK(thrown_code([&] { decode_archive(bytes); }) == code_of(ErrorCode::kFormat));
}

TEST_CASE("inconsistent in-memory archives cannot be encoded") {
  auto a = tiny_archive(2, false);
  a.steps[1].outputs = Matrix(16, 15);
  CHECK(thrown_code([&] { encode_archive(a); }) == code_of(ErrorCode::kFormat));
  auto b = tiny_archive(2, false);
  b.schedule.pop_back();
  CHECK(thrown_code([&] { encode_archive(b); }) == code_of(ErrorCode::kFormat));
}

TEST_CASE("csv dump has one row per step and token") {
  const auto a = tiny_archive(2, false);
  std::ostringstream out;
  write_archive_csv(out, a);
  std::istringstream in(out.str());
  std::string header, line;
  std::getline(in, header);
  CHECK(header.rfind("step,token,timestep,computed,attn_l0,out_0,", 0) == 0);
  std::size_t rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 2 * 16);
}

// Copyright 2026 The specdiff-lab Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>

#include "specdiff/error.hpp"
#include "specdiff/trace.hpp"

namespace specdiff {

std::size_t AttentionTrace::query_count() const {
  return static_cast<std::size_t>(std::count(computed.begin(), computed.end(), std::uint8_t{1}));
}

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kConfiguration: return "configuration";
    case ErrorCode::kInvalidArgument: return "invalid_argument";
    case ErrorCode::kPrecondition: return "precondition";
    case ErrorCode::kCacheIntegrity: return "cache_integrity";
    case ErrorCode::kNumericDivergence: return "numeric_divergence";
    case ErrorCode::kTraceFormat: return "trace_format";
    case ErrorCode::kSchedule: return "schedule";
    case ErrorCode::kIncompatibleArchives: return "incompatible_archives";
    case ErrorCode::kFormat: return "format";
    case ErrorCode::kUnsupportedVersion: return "unsupported_version";
    case ErrorCode::kIo: return "io";
  }
  return "unknown";
}

}  // namespace specdiff

// Copyright 2026 The specdiff-lab Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace specdiff {

enum class ErrorCode {
  kConfiguration,
  kInvalidArgument,
  kPrecondition,
  kCacheIntegrity,
  kNumericDivergence,
  kTraceFormat,
  kSchedule,
  kIncompatibleArchives,
  kFormat,
  kUnsupportedVersion,
  kIo,
};

std::string_view error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

inline void require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) {
    throw Error(code, message);
  }
}

}  // namespace specdiff

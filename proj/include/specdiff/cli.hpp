// Copyright 2026 The specdiff-lab Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace specdiff {

// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitFormat = 3;
inline constexpr int kExitIo = 4;

/// Entry point behind the `specdiff` binary. `args` excludes the program
/// name. Reports go to `out` unless redirected to a file; diagnostics and
/// error stubs go to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace specdiff

// Copyright 2026 The tiflab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <ostream>

namespace tiflab::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitRuntime = 2;

// The `tiflab` command line. Progress goes to `out`, diagnostics to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace tiflab::cli

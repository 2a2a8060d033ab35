#pragma once

namespace pkgscan::cli {

/// Entry point behind tools/pkgscan. Returns the process exit code:
/// 0 success, 2 per-package errors, 64 usage, 66 missing input,
/// 74 I/O error, 70 internal error.
int run(int argc, const char* const* argv);

}  // namespace pkgscan::cli

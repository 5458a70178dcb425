#pragma once

#include <iosfwd>

namespace mixtile {

inline constexpr int kSchemaVersion = 1;

// Entry point of the `mixtile` command line. Returns the exit code:
// 0 success, 1 runtime or numerical failure, 2 usage error.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace mixtile

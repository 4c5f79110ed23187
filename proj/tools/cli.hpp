#pragma once

#include <iosfwd>

namespace fewie::cli {

enum ExitCode : int {
  kOk = 0,
  kUsage = 1,
  kDataError = 2,
  kInfeasible = 3,
};

// Entry point of the fewie-bench tool; returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace fewie::cli

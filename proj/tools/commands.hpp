#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace stnet::cli {

enum ExitCode : int {
  kSuccess = 0,
  kUsageError = 1,     // bad flags, unreadable or malformed inputs
  kPipelineError = 2,  // TD pass died, no attended region
};

// Runs the command line `args` (args[0] is the program name). JSON results go
// to `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace stnet::cli

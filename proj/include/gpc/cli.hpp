#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "gpc/error.hpp"

namespace gpc {

/// Process exit codes.
enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitData = 2, kExitNumerical = 3 };

int exit_code_for(ErrorKind kind);

/// Runs the `gpc` command line. `args` excludes the program name. Results
/// and tables go to `out`, diagnostics to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace gpc

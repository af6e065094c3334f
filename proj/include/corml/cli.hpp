#pragma once

#include <iosfwd>

namespace corml {

/// Exit codes of the command-line tool.
enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitData = 2, kExitNumerical = 3 };

/// Entry point of the `corml` tool. Never throws; errors become a message on
/// `err` and a nonzero exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace corml

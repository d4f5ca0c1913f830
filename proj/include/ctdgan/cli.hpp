#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ctdgan::cli {

/// Exit statuses of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInvalid = 1;  // usage, validation, or io errors
inline constexpr int kExitRuntime = 2;  // training diverged or sampling stalled

/// Runs one subcommand. `args` excludes the program name. Regular output
/// goes to `out`; diagnostics and logs go to stderr.
int run(const std::vector<std::string>& args, std::ostream& out);

int run(int argc, char** argv);

}  // namespace ctdgan::cli

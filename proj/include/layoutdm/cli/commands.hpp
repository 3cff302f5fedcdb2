#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace layoutdm {

// Process exit codes.
inline constexpr int kExitSuccess = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitNumeric = 4;

// Runs the command line `args` (args[0] is the program name). Regular output
// goes to `out`, diagnostics to `err`. Returns the exit code.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace layoutdm

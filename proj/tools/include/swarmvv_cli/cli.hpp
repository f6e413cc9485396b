#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace swarmvv::cli {

/// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitViolations = 1;
inline constexpr int kExitError = 2;

/// Runs the command line tool in-process. `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace swarmvv::cli

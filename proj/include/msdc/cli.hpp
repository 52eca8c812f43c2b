#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace msdc {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitDimension = 2;
inline constexpr int kExitIngest = 3;
inline constexpr int kExitUsage = 64;

// Runs one subcommand; `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace msdc

#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace flowte::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;  // runtime error (bad input file, solver failure)
inline constexpr int kExitUsage = 2;    // unknown subcommand/flag, missing argument

/// Runs `flowte <args...>`; args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace flowte::cli

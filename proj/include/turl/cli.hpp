#pragma once

#include <iostream>
#include <string>
#include <vector>

namespace turl {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Subcommands train, eval, score, advgen and stats. Returns the exit code.
int run_cli(int argc, const char* const* argv, std::istream& in = std::cin, std::ostream& out = std::cout,
            std::ostream& err = std::cerr);

/// Same, with the program name supplied.
int run_cli(const std::vector<std::string>& args, std::istream& in = std::cin, std::ostream& out = std::cout,
            std::ostream& err = std::cerr);

}  // namespace turl

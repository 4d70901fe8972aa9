#pragma once

#include <iostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "coc/ccdf.hpp"

namespace coc {

/// Exit codes of the command-line front end.
inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

/// Malformed input file (exit code 2).
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Runs `cocsim <command> [flags]`; returns the exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout,
            std::ostream& err = std::cerr);
int run_cli(const std::vector<std::string>& args, std::ostream& out = std::cout,
            std::ostream& err = std::cerr);

/// Shortest round-trip decimal form, used for every number written to CSV.
std::string format_number(double v);

/// Reads a two-column `w,x_w` CSV into a Ccdf; throws InputError on malformed input.
Ccdf read_ccdf_csv(const std::string& path);

}  // namespace coc

#pragma once

// Batch driver: one subcommand per experiment, JSON config in, CSV and JSON
// files out.

#include <string>
#include <vector>

#include "json.hpp"

namespace halfdirac::cli {

using json = nlohmann::ordered_json;

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitComputation = 3;

const std::vector<std::string>& subcommands();

/// Runs one subcommand on a parsed config and writes its files into
/// config["out"]. Throws ValidationError / ComputationError.
void run(const std::string& subcommand, const json& config);

/// "%.11e" with negative zero printed as zero.
std::string format_number(double x);

/// Full command line entry point; returns the process exit code.
int main(int argc, char** argv);

}  // namespace halfdirac::cli

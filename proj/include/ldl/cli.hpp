#pragma once

#include <exception>
#include <filesystem>
#include <string>
#include <vector>

#include "ldl/config.hpp"

namespace ldl {

inline constexpr const char* kToolVersion = "ldlqsde 1.0.0";

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitValidation = 2,
  kExitTolerance = 3,
  kExitConvergence = 4,
  kExitNumerical = 5,
};

struct OutputFile {
  std::string name;
  std::string content;
};

struct ExitReport {
  int code = kExitOk;
  std::string summary;
  std::vector<OutputFile> files;
};

/// Runs c.command and returns the rendered outputs without touching the file system.
/// Library exceptions propagate.
ExitReport render(const RunConfig& c);

/// Writes every file to a temporary name inside `dir` first, then renames them into place.
void write_outputs(const std::filesystem::path& dir, const std::vector<OutputFile>& files);

/// render + write_outputs; exceptions become exit codes and a message in the summary.
ExitReport execute(const RunConfig& c, const std::filesystem::path& out_dir);

int exit_code_for(const std::exception& e);

/// Command-line entry: `ldlqsde [command] --config PATH [--out DIR] [--seed N] [--threads N]`.
int run_cli(int argc, char** argv);

}  // namespace ldl

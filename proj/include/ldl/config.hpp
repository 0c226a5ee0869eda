#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ldl/spectral.hpp"

namespace ldl {

inline constexpr const char* kCommands[] = {"derive", "gamma", "decay", "prelimit", "scatter", "check"};

/// A parsed run configuration. Every key is optional except the model and system tables;
/// unknown keys are rejected with their dotted path.
struct RunConfig {
  std::string command;  // empty when the file does not name one
  std::uint64_t seed = 1;
  int threads = 1;
  /// FNV-1a of the config text, hex
  std::string hash;

  std::optional<SpectralModel> model;
  std::optional<SystemModel> system;

  /// energies at which R and gamma are tabulated; default: `points` midpoints per band
  std::vector<double> energies;
  int points = 10;

  double t_max = 10.0;
  int steps = 40;

  std::vector<double> lambdas{1.0, 0.5, 0.25, 0.125};

  int grid_points = 128;
  double eta = 0.05;
  double horizon = 20.0;

  int random_trials = 100;
  int algebra_trials = 200;
};

/// Parses TOML text; relative file references resolve against `base`.
RunConfig parse_config(std::string_view text, const std::filesystem::path& base = ".");
RunConfig load_config(const std::filesystem::path& path);

/// Energies used for tabulation: the explicit list, or `points` midpoints inside each band.
std::vector<double> tabulation_energies(const RunConfig& c);

}  // namespace ldl

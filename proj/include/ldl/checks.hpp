#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ldl/scattering.hpp"
#include "ldl/spectral.hpp"

namespace ldl {

struct CheckItem {
  std::string name;
  double value = 0;
  double bound = 0;
  bool passed = false;
  std::string detail;
};

/// Antisymmetry, adjoint covariance and causal/symmetric coherence of the commutation table,
/// for every generator-kind pair under `trials` random label assignments. value = failures.
CheckItem check_algebra(std::uint64_t seed, int trials = 200);
/// Worst fixed-point residual of the annihilator commutator and of the normally ordered
/// number term over random instantiations with system dimension 1..max_dim.
CheckItem check_fixed_points(std::uint64_t seed, int trials = 100, int max_dim = 5);
/// Worst residual of i D_eps (1 - D_{1-eps} gamma_0 gamma_1 T_eps D_eps) = i T_eps D_eps.
CheckItem check_collision_identity(std::uint64_t seed, int trials = 100, int max_dim = 5);
/// Smallest eigenvalue of the Hermitian part of the damping operator over the given model and
/// `random_models` randomized valid models.
CheckItem check_damping_suite(const SpectralModel& m, const SystemModel& s, std::uint64_t seed,
                              int random_models = 50);
/// Semigroup residual of e^{-Gamma t} on [0, tmax]; when Gamma is diagonal the diagonal entries
/// must decrease strictly wherever Re Gamma_ii > 0.
CheckItem check_decay(const SpectralModel& m, const SystemModel& s, double tmax = 10.0);
/// Full and simplex kernel sweeps and the two-point function on bumps inside the model's bands.
CheckItem check_prelimit(const SpectralModel& m);
/// -i V1 Omega against the spectral T operator on `points` grid nodes, plus Cauchy differences
/// on points/4, points/2, points, 2 points.
CheckItem check_scattering(const SpectralModel& m, const SystemModel& s, int points = 128);
/// Normalization residual at `per_band` energies inside each band.
CheckItem check_normalization(const SpectralModel& m, const SystemModel& s, int per_band = 10);

struct SuiteOptions {
  std::uint64_t seed = 1;
  int threads = 1;
  int scatter_points = 128;
  int algebra_trials = 200;
  int random_trials = 100;
};

/// All checks above, run on up to `threads` workers; results in a fixed order.
std::vector<CheckItem> run_suite(const SpectralModel& m, const SystemModel& s, const SuiteOptions& opt);

}  // namespace ldl

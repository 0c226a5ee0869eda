#pragma once

#include <optional>
#include <vector>

#include "ldl/golden_rule.hpp"
#include "ldl/spectral.hpp"

namespace ldl {

/// Midpoint energy grid over the two band supports, with the form factors sampled on it.
/// Coupled-space index: system * size() + node.
class GridSpace {
 public:
  /// `points` nodes in total, split evenly between the two bands.
  GridSpace(const SpectralModel& m, int points);

  int size() const { return static_cast<int>(energy_.size()); }
  double energy(int k) const { return energy_[k]; }
  double weight(int k) const { return weight_[k]; }
  int band_of(int k) const { return band_[k]; }
  /// sqrt(rho_eps(E_k) dE_k) on band eps, 0 elsewhere.
  const Eigen::VectorXd& g_vec(int eps) const { return g_[eps]; }
  /// E_k + omega0 on band 0.
  Eigen::VectorXd h1() const;
  /// E_k: the part of H1 generating the free flow of the form factors.
  Eigen::VectorXd h1_prime() const;
  const SpectralModel& model() const { return model_; }

 private:
  SpectralModel model_;
  std::vector<double> energy_;
  std::vector<double> weight_;
  std::vector<int> band_;
  Eigen::VectorXd g_[2];
};

/// sum_eps D_eps (x) |g_eps><g_{1-eps}| on the coupled space.
CMatrix v1_matrix(const GridSpace& grid, const SystemModel& sys);

/// Solution of d/dt U = -i sum_eps D_eps (x) |S_t g_eps><S_t g_{1-eps}| U, U_0 = 1, with S_t = e^{i t H1'},
/// by classical Runge-Kutta. Throws ToleranceError when the unitarity defect exceeds 1e-8 per unit time.
CMatrix evolve_one_particle(const GridSpace& grid, const SystemModel& sys, double t, double dt);

enum class Direction { plus, minus };

/// Which time-dependent family is averaged:
///   evolution:   the solution U_t of the equation above, e^{i H0' t} e^{-i (H0' + V1) t}
///   exponential: e^{i (H0' + V1) t} e^{-i H0' t}
enum class MollerForm { evolution, exponential };

struct MollerOptions {
  double eta = 0.05;
  /// Tmax = horizon / eta
  double horizon = 20.0;
  MollerForm form = MollerForm::exponential;
  /// relative difference between eta and eta/2 results that counts as converged
  double tolerance = 0.1;
};

struct MollerResult {
  CMatrix omega;       // Richardson combination 2 Omega(eta/2) - Omega(eta)
  CMatrix omega_eta;   // Abel average at eta
  CMatrix omega_half;  // Abel average at eta/2
  double estimate = 0; // |(Omega(eta) - Omega(eta/2)) G| / |Omega(eta/2) G| over the form-factor states G
};

/// eta int_0^Tmax e^{-eta t} X_{+-t} dt in closed form from the spectral decomposition of H0' + V1.
CMatrix abel_average(const GridSpace& grid, const SystemModel& sys, Direction dir, double eta, double tmax,
                     MollerForm form);
/// Abel-averaged Moller operator with an eta / (eta/2) convergence estimate; throws ConvergenceError
/// with both results when the estimate exceeds the tolerance.
MollerResult moller(const GridSpace& grid, const SystemModel& sys, Direction dir, const MollerOptions& opt = {});

/// Columns u (x) g_b for every system basis vector u and band b, column 2u + b.
CMatrix form_factor_states(const GridSpace& grid, int dim);

/// |(H0 + V1) Omega - Omega H0| / |Omega| for the exponential family, |Omega (H0 + V1) - H0 Omega| / |Omega|
/// for the evolution family (spectral norms). H0 = hs (x) 1 + 1 (x) H1 when hs is given, else 1 (x) H1'.
double intertwining_residual(const GridSpace& grid, const SystemModel& sys, const CMatrix& omega, MollerForm form,
                             const std::optional<CMatrix>& hs = std::nullopt);

/// V1 Omega.
CMatrix t_operator_dynamic(const GridSpace& grid, const SystemModel& sys, const CMatrix& omega);
/// sum_k sum_{eps,eps'} R_{eps,eps'}(E_k) (x) |g_eps><g_eps'| |k><k|.
CMatrix t_operator_spectral(const GridSpace& grid, const SystemModel& sys);

/// <u (x) g_a | X | u' (x) g_b> for all u, u' and bands a, b: element [a][b](u, u').
std::array<std::array<CMatrix, 2>, 2> band_elements(const GridSpace& grid, const CMatrix& x, int dim);

struct ElementRow {
  int band_a, band_b, u, v;
  cplx spectral;
  cplx dynamic;  // -i <u (x) g_a | V1 Omega | v (x) g_b>
  double rel;    // |dynamic - spectral| / |spectral|
  bool dominant;
};

struct CrossCheck {
  Direction direction;  // the Abel direction whose T operator matches the spectral one
  double worst = 0;     // largest rel over dominant elements for that direction
  double worst_other = 0;
  double estimate = 0;  // eta convergence estimate for that direction
  double intertwining = 0;
  std::vector<ElementRow> rows;
};

/// Compares -i V1 Omega with the spectral T operator for both Abel directions and keeps the closer one.
/// Elements with |spectral| >= dominant * max |spectral| count as dominant.
CrossCheck cross_check(const GridSpace& grid, const SystemModel& sys, const MollerOptions& opt = {},
                       double dominant = 0.05);

}  // namespace ldl

#pragma once

#include <array>
#include <functional>
#include <map>
#include <string>

#include "ldl/noise_algebra.hpp"
#include "ldl/spectral.hpp"

namespace ldl {

/// Scalar data at one energy: gamma_eps(E) and w_eps(E); n_eps = 1/w_eps.
struct Instantiation {
  std::array<cplx, 2> gamma{};
  std::array<double, 2> w{1.0, 1.0};
};

Instantiation instantiate(const SpectralModel& m, double e);

/// Value of the system and scalar part of a term (everything except the noise word).
CMatrix evaluate_coefficient(const algebra::Term& t, const SystemModel& sys, const Instantiation& in);

/// Sum of evaluated coefficients grouped by noise word, e.g. "Bd01(E;t) U(t) B10(E;t)".
using WordTable = std::map<std::string, CMatrix>;
WordTable collect(const algebra::Expr& x, const SystemModel& sys, const Instantiation& in);
std::string word_key(const std::vector<algebra::Factor>& word);

namespace golden {

/// -i sum_eps' D_eps' int dE' int dt1 [B_{x,y}(E,t), N_{eps',1-eps'}(E',t1) + B+_{eps',1-eps'}(E',t1)] U(t1)
/// with the energy and time integrals carried out against the kernels. Equals [B_{x,y}(E,t), U(t)]
/// with every remaining annihilator still to the left of U.
algebra::Expr evolution_step(int x, int y);

/// Y_x = [B_{x,y}(E,t), U(t)] on the basis {U, U B_{0,y}, U B_{1,y}}, from the fixed-point system
/// Y = A + M Y read off `evolution_step` (B U = Y + U B).
struct FixedPoint {
  int y = 0;
  std::array<std::array<CMatrix, 3>, 2> a;  // a[x][basis]
  std::array<std::array<CMatrix, 2>, 2> m;  // m[x][x'] multiplies Y_{x'}
  std::array<std::array<CMatrix, 3>, 2> solution;
};

FixedPoint solve_fixed_point(const SystemModel& sys, const Instantiation& in, int y);

/// Coefficients of the normally ordered right-hand side assembled from the fixed points.
///   number[e][x]:       n_{e'} B+_{e,e'} U B_{x,e'}  (checked for both e')
///   creation[e][e']:    B+_{e,e'} U
///   annihilation[x][y]: U B_{x,y}
///   drift:              U
struct NormalOrder {
  std::array<std::array<CMatrix, 2>, 2> number;
  std::array<std::array<CMatrix, 2>, 2> creation;
  std::array<std::array<CMatrix, 2>, 2> annihilation;
  CMatrix drift;
  /// mismatch of the number coefficient between the two e' channels
  double channel_spread = 0;
};

NormalOrder assemble_normal_order(const SystemModel& sys, const Instantiation& in);

}  // namespace golden

/// R_{eps,eps'} from the closed form.
CMatrix r_matrix(const SystemModel& sys, const Instantiation& in, int eps, int eps2);

struct QsdeCoefficients {
  /// R_{eps,eps'}(E)
  std::function<CMatrix(int, int, double)> r;
  /// Integrand of the damping operator: -sum_eps R_{eps,eps}(E) w_eps(E).
  std::function<CMatrix(double)> drift_integrand;
  /// Damping operator integrated over both bands.
  std::function<CMatrix()> drift;
  /// T_3(E) as the 2x2 block map (eps, eps') -> 2 pi R_{eps,eps'}(E).
  std::function<std::array<std::array<CMatrix, 2>, 2>(double)> fm_operator;
  /// Components 1 / (2 pi <g_eps, P_E g_eps>) of xi(E).
  std::function<std::array<double, 2>(double)> fm_vector;
  /// The normally ordered integrand in terms of R.
  algebra::Expr integrand;
};

/// Closures are evaluated lazily; a singular T_eps(E) throws at evaluation time.
QsdeCoefficients derive_qsde(const SystemModel& sys, const SpectralModel& model);
/// The normally ordered integrand with T_eps(E), gamma, n and w kept symbolic.
algebra::Expr normal_ordered_integrand();

double verify_te_identity(const SystemModel& sys, cplx g0, cplx g1);
double verify_theorem2(const SystemModel& sys, const Instantiation& in);
double verify_theorem3(const SystemModel& sys, const Instantiation& in);

/// |<xi, T3 xi> - sum_eps R_{eps,eps} w_eps| at energy E.
double fm_consistency(const SystemModel& sys, const SpectralModel& model, double e);

}  // namespace ldl

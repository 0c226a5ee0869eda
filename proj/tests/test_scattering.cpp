#include <cmath>
#include <random>

#include "doctest.h"
#include "ldl/errors.hpp"
#include "ldl/scattering.hpp"
#include "oracles.hpp"

using namespace ldl;

namespace {

const cplx kI{0, 1};

// V1 entry by entry: <i,k| D_eps (x) |g_eps><g_{1-eps}| |j,l>.
CMatrix explicit_v1(const GridSpace& g, const SystemModel& s) {
  const int n = g.size(), dim = s.dim() * n;
  CMatrix v = CMatrix::Zero(dim, dim);
  for (int i = 0; i < s.dim(); ++i)
    for (int j = 0; j < s.dim(); ++j)
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l)
          for (int eps = 0; eps < 2; ++eps)
            v(i * n + k, j * n + l) += s.d(eps)(i, j) * g.g_vec(eps)(k) * g.g_vec(1 - eps)(l);
  return v;
}

Eigen::VectorXd free_diag(const GridSpace& g, int ns) {
  Eigen::VectorXd h(ns * g.size());
  for (int i = 0; i < h.size(); ++i) h(i) = g.energy(i % g.size());
  return h;
}

// e^{i H0' t} e^{-i (H0' + V1) t} from a Hermitian eigendecomposition.
CMatrix closed_evolution(const GridSpace& g, const SystemModel& s, double t) {
  const Eigen::VectorXd h0 = free_diag(g, s.dim());
  CMatrix h = explicit_v1(g, s);
  h.diagonal() += h0.cast<cplx>();
  Eigen::SelfAdjointEigenSolver<CMatrix> es(h);
  Eigen::VectorXcd ph(h0.size());
  for (int i = 0; i < ph.size(); ++i) ph(i) = std::polar(1.0, -es.eigenvalues()(i) * t);
  const CMatrix full = es.eigenvectors() * ph.asDiagonal() * es.eigenvectors().adjoint();
  Eigen::VectorXcd left(h0.size());
  for (int i = 0; i < left.size(); ++i) left(i) = std::polar(1.0, h0(i) * t);
  return left.asDiagonal() * full;
}

SystemModel zero_system() { return SystemModel(CMatrix::Zero(2, 2), {0, 1}); }

double max_rel(const std::array<std::array<CMatrix, 2>, 2>& ref, const std::array<std::array<CMatrix, 2>, 2>& x,
               cplx scale, double dominant) {
  double top = 0, worst = 0;
  for (auto& row : ref)
    for (auto& m : row) top = std::max(top, m.cwiseAbs().maxCoeff());
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      for (int i = 0; i < ref[a][b].rows(); ++i)
        for (int j = 0; j < ref[a][b].cols(); ++j) {
          const cplx r = ref[a][b](i, j);
          if (std::abs(r) < dominant * top) continue;
          worst = std::max(worst, std::abs(scale * x[a][b](i, j) - r) / std::abs(r));
        }
  return worst;
}

}  // namespace

TEST_CASE("grid space invariants") {
  const auto m = model_m1();
  const GridSpace g(m, 128);
  CHECK(g.size() == 128);
  CHECK(g.g_vec(0).dot(g.g_vec(1)) == 0.0);
  for (int eps = 0; eps < 2; ++eps) {
    const auto& rho = m.rho(eps);
    const double ref = oracle::gk([&](double e) { return rho(e); }, rho.lo(), rho.hi());
    CHECK(g.g_vec(eps).squaredNorm() == doctest::Approx(ref).epsilon(1e-3));
  }
  const Eigen::VectorXd h1 = g.h1(), h1p = g.h1_prime();
  for (int k = 0; k < g.size(); ++k) {
    CHECK(h1(k) - h1p(k) == (g.band_of(k) == 0 ? m.omega0() : 0.0));
  }
  CHECK_THROWS_AS(GridSpace(m, 7), ValidationError);
  CHECK_THROWS_AS(GridSpace(SpectralModel(m.rho(0), Density::zero(), 1, 1), 8), ValidationError);
  CHECK((v1_matrix(g, system_m1()) - explicit_v1(g, system_m1())).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("no coupling gives trivial scattering") {
  const GridSpace g(model_m1(), 32);
  const auto s = zero_system();
  const CMatrix one = CMatrix::Identity(64, 64);
  CHECK((evolve_one_particle(g, s, 3.0, 0.05) - one).cwiseAbs().maxCoeff() == 0.0);
  const auto r = moller(g, s, Direction::minus);
  // e^{-20} from the truncation at Tmax = 20 / eta
  CHECK((r.omega - one).cwiseAbs().maxCoeff() < 1e-8);
  CHECK(t_operator_dynamic(g, s, r.omega).cwiseAbs().maxCoeff() == 0.0);
  CHECK(t_operator_spectral(g, s).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("short-time evolution is first order in V1") {
  const GridSpace g(model_m1(), 32);
  const auto s = system_m1();
  const double t = 1e-3;
  const CMatrix u = evolve_one_particle(g, s, t, 1e-4);
  const CMatrix first = CMatrix::Identity(64, 64) - kI * t * explicit_v1(g, s);
  CHECK((u - first).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("evolution matches the closed form and stays unitary") {
  const auto s = system_m1();
  const GridSpace small(model_m1(), 16);
  const CMatrix u = evolve_one_particle(small, s, 5.0, 0.01);
  CHECK((u - closed_evolution(small, s, 5.0)).cwiseAbs().maxCoeff() < 1e-9);

  const GridSpace g(model_m1(), 64);
  const CMatrix u50 = evolve_one_particle(g, s, 50.0, 0.02);
  const double defect = (u50.adjoint() * u50 - CMatrix::Identity(128, 128)).cwiseAbs().maxCoeff();
  CHECK(defect <= 1e-8);
  CHECK_THROWS_AS(evolve_one_particle(g, SystemModel(CMatrix::Identity(2, 2) * 40.0), 2.0, 0.5), ToleranceError);
  CHECK_THROWS_AS(evolve_one_particle(g, s, -1.0, 0.1), ValidationError);
}

TEST_CASE("Abel average against direct time quadrature") {
  const auto s = system_m1();
  const GridSpace g(model_m1(), 16);
  const double eta = 0.5, tmax = 12.0;
  for (auto dir : {Direction::plus, Direction::minus}) {
    const double sign = dir == Direction::plus ? 1.0 : -1.0;
    const int n = 6000;
    const double h = tmax / n;
    CMatrix evo = CMatrix::Zero(32, 32), expo = CMatrix::Zero(32, 32);
    for (int i = 0; i <= n; ++i) {
      const double t = i * h;
      const double w = (i == 0 || i == n) ? 1 : (i % 2 ? 4 : 2);
      const CMatrix u = closed_evolution(g, s, sign * t);
      evo += w * eta * std::exp(-eta * t) * u;
      expo += w * eta * std::exp(-eta * t) * u.adjoint();
    }
    evo *= h / 3;
    expo *= h / 3;
    CHECK((abel_average(g, s, dir, eta, tmax, MollerForm::evolution) - evo).cwiseAbs().maxCoeff() < 1e-8);
    CHECK((abel_average(g, s, dir, eta, tmax, MollerForm::exponential) - expo).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("Moller operator on the desk model") {
  const auto s = system_m1();
  const GridSpace g(model_m1(), 128);
  const auto r = moller(g, s, Direction::minus);
  CHECK(r.estimate <= 1e-2);

  // smooth random states in the span of the form factors are kept in norm
  std::mt19937 rng(11);
  std::normal_distribution<double> nd;
  const int n = g.size();
  for (int trial = 0; trial < 5; ++trial) {
    Eigen::VectorXcd x = Eigen::VectorXcd::Zero(2 * n);
    for (int u = 0; u < 2; ++u)
      for (int b = 0; b < 2; ++b) {
        const cplx c(nd(rng), nd(rng));
        const double slope = nd(rng);
        for (int k = 0; k < n; ++k) x(u * n + k) += c * (1.0 + 0.3 * slope * (g.energy(k) - 3.5)) * g.g_vec(b)(k);
      }
    CHECK(std::abs((r.omega * x).norm() / x.norm() - 1.0) < 1e-2);
  }

  CHECK(intertwining_residual(g, s, r.omega, MollerForm::exponential) <= 1e-2);
  // the evolution family averaged towards the future satisfies the reversed relation
  MollerOptions future;
  future.form = MollerForm::evolution;
  CHECK(intertwining_residual(g, s, moller(g, s, Direction::plus, future).omega, MollerForm::evolution) <= 1e-2);
  // the system Hamiltonian and the omega0 shift of band 0 commute with everything in play
  CMatrix hs = CMatrix::Zero(2, 2);
  hs(1, 1) = model_m1().omega0();
  CHECK(intertwining_residual(g, s, r.omega, MollerForm::exponential, hs) ==
        doctest::Approx(intertwining_residual(g, s, r.omega, MollerForm::exponential)).epsilon(1e-6));

  MollerOptions strict;
  strict.tolerance = 1e-6;
  try {
    moller(g, s, Direction::minus, strict);
    FAIL("expected ConvergenceError");
  } catch (const ConvergenceError& e) {
    const std::string what = e.what();
    CHECK(what.find("0.050000") != std::string::npos);
    CHECK(what.find("0.025000") != std::string::npos);
  }
}

TEST_CASE("spectral T operator from the golden-rule coefficients") {
  const auto m = model_m1();
  const auto s = system_m1();
  const GridSpace g(m, 64);
  const auto t = band_elements(g, t_operator_spectral(g, s), 2);
  // D = |e0><e1|: D0 D1 = |e0><e0| so the only off-band entry is -i / (1 + gamma0 gamma1)
  cplx ref = 0;
  for (int k = 0; k < g.size(); ++k) {
    if (g.band_of(k) != 1) continue;
    const double e = g.energy(k);
    ref += -kI / (1.0 + gamma_eps(m, 0, e) * gamma_eps(m, 1, e)) * std::pow(g.g_vec(1)(k), 2);
  }
  ref *= g.g_vec(0).squaredNorm();
  CHECK(std::abs(t[0][1](0, 1) - ref) < 1e-12);

  // band selection: each band pair reaches a single system entry
  const int allowed[2][2][2] = {{{0, 0}, {0, 1}}, {{1, 0}, {1, 1}}};
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) {
          if (i == allowed[a][b][0] && j == allowed[a][b][1]) {
            CHECK(std::abs(t[a][b](i, j)) > 1e-4);
          } else {
            CHECK(t[a][b](i, j) == cplx(0));
          }
        }
}

TEST_CASE("dynamic and spectral T operators agree") {
  const auto s = system_m1();
  const GridSpace g(model_m1(), 128);
  const auto spec = band_elements(g, t_operator_spectral(g, s), 2);
  auto dyn = [&](Direction d, MollerForm f) {
    MollerOptions o;
    o.form = f;
    return band_elements(g, t_operator_dynamic(g, s, moller(g, s, d, o).omega), 2);
  };
  CHECK(max_rel(spec, dyn(Direction::minus, MollerForm::exponential), -kI, 0.05) <= 0.05);
  // first order is shared by every average; the second-order diagonal entries pick the direction
  CHECK(max_rel(spec, dyn(Direction::plus, MollerForm::evolution), -kI, 0.5) <= 0.05);
  CHECK(max_rel(spec, dyn(Direction::plus, MollerForm::evolution), -kI, 0.05) > 0.1);
  CHECK(max_rel(spec, dyn(Direction::plus, MollerForm::exponential), -kI, 0.05) > 0.1);
  CHECK(max_rel(spec, dyn(Direction::minus, MollerForm::evolution), -kI, 0.05) > 0.1);
}

TEST_CASE("grid refinement") {
  const auto s = system_m1();
  std::vector<std::array<std::array<CMatrix, 2>, 2>> dyn, spec;
  for (int pts : {32, 64, 128, 256}) {
    const GridSpace g(model_m1(), pts);
    dyn.push_back(band_elements(g, t_operator_dynamic(g, s, moller(g, s, Direction::minus).omega), 2));
    spec.push_back(band_elements(g, t_operator_spectral(g, s), 2));
  }
  auto diff = [](const auto& x, const auto& y) {
    double d = 0;
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b) d = std::max(d, (x[a][b] - y[a][b]).cwiseAbs().maxCoeff());
    return d;
  };
  for (std::size_t i = 2; i < dyn.size(); ++i) {
    CHECK(diff(dyn[i], dyn[i - 1]) < diff(dyn[i - 1], dyn[i - 2]));
    CHECK((diff(spec[i], spec[i - 1]) < diff(spec[i - 1], spec[i - 2]) || diff(spec[i], spec[i - 1]) < 1e-12));
  }
}

TEST_CASE("cross check selects the past average") {
  const GridSpace g(model_m1(), 64);
  const auto c = cross_check(g, system_m1());
  CHECK(c.direction == Direction::minus);
  CHECK(c.worst <= 0.05);
  CHECK(c.worst_other > 0.1);
  CHECK(c.rows.size() == 16);
  int dominant = 0;
  for (const auto& r : c.rows) dominant += r.dominant;
  CHECK(dominant == 4);
}

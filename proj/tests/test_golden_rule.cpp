#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "ldl/errors.hpp"
#include "ldl/golden_rule.hpp"

using namespace ldl;
using algebra::Expr;

namespace {

const cplx I(0, 1);

double gap(const CMatrix& a, const CMatrix& b) { return (a - b).cwiseAbs().maxCoeff(); }

CMatrix random_matrix(std::mt19937& rng, int n, double scale = 1.0) {
  std::normal_distribution<double> nd;
  CMatrix d(n, n);
  for (int i = 0; i < n * n; ++i) d(i / n, i % n) = scale * cplx(nd(rng), nd(rng));
  return d;
}

// |gamma| <= 10, Re gamma > 0, w in (0.1, 1.1)
Instantiation random_instantiation(std::mt19937& rng) {
  std::uniform_real_distribution<double> u(0, 1);
  Instantiation in;
  for (int e = 0; e < 2; ++e) {
    in.gamma[e] = std::polar(0.05 + 9.95 * u(rng), (u(rng) - 0.5) * 3.1);
    in.w[e] = 0.1 + u(rng);
  }
  return in;
}

CMatrix inverse_of(const CMatrix& a) { return a.fullPivLu().inverse(); }

// Hand-written fixed point: [B_{x,y}, U] = -i D_x g_x (delta_{y,1-x} w_y U + [B_{1-x,y}, U] + U B_{1-x,y}),
// written on the basis {U, U B_{0,y}, U B_{1,y}} and solved by dense elimination.
std::array<std::array<CMatrix, 3>, 2> hand_fixed_point(const SystemModel& s, const Instantiation& in, int y) {
  const int n = s.dim();
  const CMatrix id = CMatrix::Identity(n, n);
  std::array<CMatrix, 2> c;
  for (int x = 0; x < 2; ++x) c[x] = -I * in.gamma[x] * s.d(x);
  std::array<std::array<CMatrix, 3>, 2> src;
  for (int x = 0; x < 2; ++x) {
    for (auto& m : src[x]) m = CMatrix::Zero(n, n);
    if (y == 1 - x) src[x][0] = c[x] * in.w[y];
    src[x][1 + (1 - x)] = c[x];
  }
  // Y_0 = src_0 + c_0 Y_1, Y_1 = src_1 + c_1 Y_0  =>  Y_0 = (1 - c_0 c_1)^{-1} (src_0 + c_0 src_1)
  const CMatrix inv = inverse_of(id - c[0] * c[1]);
  std::array<std::array<CMatrix, 3>, 2> y_out;
  for (int b = 0; b < 3; ++b) {
    y_out[0][b] = inv * (src[0][b] + c[0] * src[1][b]);
    y_out[1][b] = src[1][b] + c[1] * y_out[0][b];
  }
  return y_out;
}

CMatrix t_dense(const SystemModel& s, const Instantiation& in, int eps) {
  const int n = s.dim();
  return inverse_of(CMatrix::Identity(n, n) + in.gamma[0] * in.gamma[1] * s.d(eps) * s.d(1 - eps));
}

Instantiation swapped(const Instantiation& in) {
  Instantiation out;
  out.gamma = {in.gamma[1], in.gamma[0]};
  out.w = {in.w[1], in.w[0]};
  return out;
}

}  // namespace

TEST_CASE("evolution step reproduces the single-commutator formula") {
  for (int x = 0; x < 2; ++x) {
    for (int y = 0; y < 2; ++y) {
      const Expr got = golden::evolution_step(x, y);
      const std::string d = "sys{D" + std::to_string(x) + "}";
      const std::string g = "gamma" + std::to_string(x) + "(E)";
      const std::string b = "B" + std::to_string(1 - x) + std::to_string(y) + "(E;t)";
      std::string text = "(0,-1) tp0 be{} bt{} " + d + " sc{" + g + "} nz{" + b + " U(t)}";
      if (y == 1 - x) {
        text += "\n(0,-1) tp0 be{} bt{} " + d + " sc{w" + std::to_string(y) + "(E) " + g + "} nz{U(t)}";
      }
      CHECK_MESSAGE(algebra::equivalent(got, algebra::parse_expr(text)), algebra::serialize(got));
    }
  }
}

TEST_CASE("fixed point agrees with hand elimination") {
  std::mt19937 rng(21);
  for (int trial = 0; trial < 30; ++trial) {
    const SystemModel s(random_matrix(rng, 1 + trial % 4));
    const Instantiation in = random_instantiation(rng);
    for (int y = 0; y < 2; ++y) {
      const auto fp = golden::solve_fixed_point(s, in, y);
      const auto ref = hand_fixed_point(s, in, y);
      for (int x = 0; x < 2; ++x) {
        for (int b = 0; b < 3; ++b) {
          const double scale = std::max(1.0, ref[x][b].cwiseAbs().maxCoeff());
          CHECK(gap(fp.solution[x][b], ref[x][b]) / scale < 1e-12);
        }
      }
    }
  }
}

TEST_CASE("zero coupling gives free evolution") {
  const SystemModel s(CMatrix::Zero(3, 3));
  std::mt19937 rng(2);
  const Instantiation in = random_instantiation(rng);
  for (int a = 0; a < 2; ++a) {
    for (int b = 0; b < 2; ++b) CHECK(r_matrix(s, in, a, b).norm() == 0.0);
  }
  CHECK(verify_te_identity(s, in.gamma[0], in.gamma[1]) == 0.0);
  CHECK(verify_theorem2(s, in) == 0.0);
  CHECK(verify_theorem3(s, in) == 0.0);
  const auto q = derive_qsde(s, model_m1());
  CHECK(q.drift_integrand(2.0).norm() == 0.0);
  CHECK(q.drift().norm() == 0.0);
}

TEST_CASE("two-level coefficients by projection algebra") {
  const auto s = system_m1();
  std::mt19937 rng(8);
  for (int trial = 0; trial < 10; ++trial) {
    const Instantiation in = random_instantiation(rng);
    const cplx g0 = in.gamma[0], g1 = in.gamma[1];
    CMatrix r00 = CMatrix::Zero(2, 2);
    r00(0, 0) = -g1 / (1.0 + g0 * g1);
    CHECK(gap(r_matrix(s, in, 0, 0), r00) < 1e-14);
    CMatrix r11 = CMatrix::Zero(2, 2);
    r11(1, 1) = -g0 / (1.0 + g0 * g1);
    CHECK(gap(r_matrix(s, in, 1, 1), r11) < 1e-14);
    // T_0 D_0 = D_0 / (1 + g g) since D_0 maps into the range of the projection
    CMatrix r01 = CMatrix::Zero(2, 2);
    r01(0, 1) = -I / (1.0 + g0 * g1);
    CHECK(gap(r_matrix(s, in, 0, 1), r01) < 1e-14);
    CHECK(gap(r_matrix(s, in, 1, 0), CMatrix(r01.transpose())) < 1e-14);
  }
}

TEST_CASE("collision identity") {
  const auto s = system_m1();
  CHECK(verify_te_identity(s, 1.0, 1.0) <= 1e-14);
  const Instantiation unit{{cplx(1), cplx(1)}, {1, 1}};
  for (int eps = 0; eps < 2; ++eps) {
    CHECK(gap(I * t_dense(s, unit, eps) * s.d(eps), 0.5 * I * s.d(eps)) < 1e-15);
  }
  std::mt19937 rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const SystemModel r(random_matrix(rng, 4));
    const Instantiation in = random_instantiation(rng);
    CHECK(verify_te_identity(r, in.gamma[0], in.gamma[1]) <= 1e-12);
  }
  CMatrix d = CMatrix::Zero(2, 2);
  d(0, 1) = 1.0;
  CHECK_THROWS_AS(verify_te_identity(SystemModel(d), cplx(1), cplx(-1)), SingularCoefficientError);
}

TEST_CASE("annihilator commutator on the desk model") {
  const auto in = instantiate(model_m1(), 2.0);
  CHECK(in.w[1] == 0.0);
  CHECK(verify_theorem2(system_m1(), in) <= 1e-12);
  CHECK(verify_theorem3(system_m1(), in) <= 1e-12);
}

TEST_CASE("theorem residuals on random instantiations") {
  std::mt19937 rng(99);
  double worst2 = 0, worst3 = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const SystemModel s(random_matrix(rng, 1 + trial % 5));
    const Instantiation in = random_instantiation(rng);
    worst2 = std::max(worst2, verify_theorem2(s, in));
    worst3 = std::max(worst3, verify_theorem3(s, in));
  }
  MESSAGE("worst residuals: ", worst2, " ", worst3);
  CHECK(worst2 <= 1e-12);
  CHECK(worst3 <= 1e-12);
}

TEST_CASE("band swap symmetry") {
  std::mt19937 rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    const CMatrix d = random_matrix(rng, 2 + trial % 3);
    const SystemModel s(d), s_swap(CMatrix(d.adjoint()));
    const Instantiation in = random_instantiation(rng);
    const Instantiation in_swap = swapped(in);
    CHECK(std::abs(verify_theorem2(s, in) - verify_theorem2(s_swap, in_swap)) < 1e-13);
    CHECK(std::abs(verify_theorem3(s, in) - verify_theorem3(s_swap, in_swap)) < 1e-13);
    for (int a = 0; a < 2; ++a) {
      for (int b = 0; b < 2; ++b) {
        CHECK(gap(r_matrix(s, in, a, b), r_matrix(s_swap, in_swap, 1 - a, 1 - b)) < 1e-12);
      }
    }
  }
}

TEST_CASE("normally ordered equation from the fixed points") {
  std::mt19937 rng(31);
  for (int trial = 0; trial < 30; ++trial) {
    const SystemModel s(random_matrix(rng, 1 + trial % 4));
    const Instantiation in = random_instantiation(rng);
    const auto no = golden::assemble_normal_order(s, in);
    CHECK(no.channel_spread < 1e-12);
    for (int a = 0; a < 2; ++a) {
      for (int b = 0; b < 2; ++b) {
        CHECK(gap(no.creation[a][b], r_matrix(s, in, a, b)) < 1e-12);
        CHECK(gap(no.number[a][b], r_matrix(s, in, a, b)) < 1e-12);
        CHECK(gap(no.annihilation[a][b], r_matrix(s, in, b, a)) < 1e-12);
      }
    }
    // the dt coefficient against the closed form, with T from a dense inverse
    CMatrix drift = CMatrix::Zero(s.dim(), s.dim());
    for (int e = 0; e < 2; ++e) {
      drift -= in.gamma[1 - e] * s.d(e) * s.d(1 - e) * t_dense(s, in, e) * in.w[e];
    }
    CHECK(gap(no.drift, drift) < 1e-12);

    // symbolic integrand evaluates to the same table
    const WordTable sym = collect(normal_ordered_integrand(), s, in);
    CHECK(gap(sym.at("U(t)"), no.drift) < 1e-12);
    CHECK(gap(sym.at("Bd01(E;t) U(t)"), no.creation[0][1]) < 1e-12);
    CHECK(gap(sym.at("U(t) B11(E;t)"), no.annihilation[1][1]) < 1e-12);
    CHECK(gap(sym.at("Bd10(E;t) U(t) B00(E;t)"), no.number[1][0] / in.w[0]) < 1e-12);
  }
}

TEST_CASE("R on the diagonal commutes with the coupling square") {
  std::mt19937 rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    const SystemModel s(random_matrix(rng, 3));
    const Instantiation in = random_instantiation(rng);
    for (int e = 0; e < 2; ++e) {
      const CMatrix dd = s.d(e) * s.d(1 - e);
      const CMatrix r = r_matrix(s, in, e, e);
      CHECK((r * dd - dd * r).cwiseAbs().maxCoeff() < 1e-10 * std::max(1.0, r.norm() * dd.norm()));
    }
  }
}

TEST_CASE("drift integrand against the assembled dt coefficient") {
  const auto m = model_m1();
  const auto s = system_m1();
  const auto q = derive_qsde(s, m);
  for (double e : {1.3, 2.0, 2.7, 4.4, 5.0, 5.8}) {
    const auto no = golden::assemble_normal_order(s, instantiate(m, e));
    CHECK(gap(q.drift_integrand(e), -no.drift) < 1e-13);
  }
  const CMatrix g = q.drift();
  CHECK(g(0, 0).real() > 0);
  CHECK(g(1, 1).real() > 0);
}

TEST_CASE("Frigerio-Maassen form") {
  const auto m = model_m1();
  const auto s = system_m1();
  CHECK(fm_consistency(s, m, 2.0) <= 1e-10);
  CHECK(fm_consistency(s, m, 5.3) <= 1e-10);
  CHECK_THROWS_AS(fm_consistency(s, m, 3.5), DomainError);
  for (double c : {0.1, 3.0}) {
    const SpectralModel scaled(Density::gaussian(0.5 * c, 2.0, 0.3, 1.0, 3.0),
                               Density::gaussian(0.5 * c, 5.0, 0.3, 4.0, 6.0), 1.0, 1.0);
    CHECK(fm_consistency(s, scaled, 2.0) <= 1e-10);
  }
  std::mt19937 rng(6);
  CHECK(fm_consistency(SystemModel(random_matrix(rng, 3)), m, 2.2) <= 1e-10);
}

TEST_CASE("singular coefficients surface only on evaluation") {
  CMatrix d = CMatrix::Zero(2, 2);
  d(0, 1) = 1.0;
  const SystemModel s(d);
  const Instantiation bad{{cplx(1), cplx(-1)}, {1, 1}};
  CHECK_THROWS_AS(r_matrix(s, bad, 0, 0), SingularCoefficientError);
  CHECK_THROWS_AS(verify_theorem2(s, bad), SingularCoefficientError);
  CHECK_NOTHROW(derive_qsde(s, model_m1()));
}

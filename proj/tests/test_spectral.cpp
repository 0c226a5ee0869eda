#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "ldl/errors.hpp"
#include "ldl/spectral.hpp"
#include "oracles.hpp"

using namespace ldl;

namespace {

constexpr double pi = std::numbers::pi;

double rel(cplx a, cplx b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

std::function<double(double)> as_fn(const Density& d) {
  return [d](double e) { return d(e); };
}

}  // namespace

TEST_CASE("gamma at the band centre") {
  const auto m = model_m1();
  const cplx g = gamma_eps(m, 0, 2.0);
  CHECK(g.real() == pi * 0.5);
  CHECK(std::abs(g.imag()) < 1e-12);
}

TEST_CASE("gamma off support is a plain integral") {
  const auto m = model_m1();
  const cplx g = gamma_eps(m, 1, 2.0);
  CHECK(g.real() == 0.0);
  CHECK(g.imag() < 0);
  const double ref = -oracle::simpson([&](double x) { return m.rho(1)(x) / (x - 2.0); }, 4, 6, 20000);
  CHECK(g.imag() == doctest::Approx(ref).epsilon(1e-10));
}

TEST_CASE("zero density gives zero gamma") {
  const SpectralModel m(Density::zero(), Density::gaussian(1, 5, 0.3, 4, 6), 1, 1);
  CHECK(gamma_eps(m, 0, 2.0) == cplx(0));
}

TEST_CASE("real part is pi times the density") {
  const auto m = model_m1();
  for (double e = 0.5; e < 6.5; e += 0.173) {
    for (int eps = 0; eps < 2; ++eps) CHECK(gamma_eps(m, eps, e).real() == pi * m.rho(eps)(e));
  }
}

TEST_CASE("damped closed form agrees with the numeric time integral") {
  const auto m = model_m1();
  for (double e : {1.7, 2.0, 2.6}) {
    const cplx closed = oracle::damped_gamma(as_fn(m.rho(0)), 1, 3, e, 0.1);
    const cplx timed = oracle::damped_gamma_time(as_fn(m.rho(0)), 1, 3, e, 0.1);
    CHECK(rel(timed, closed) < 1e-7);
  }
}

TEST_CASE("gamma matches the time-domain oracle on both bands") {
  const auto m = model_m1();
  for (int eps = 0; eps < 2; ++eps) {
    const double lo = m.rho(eps).lo();
    const double hi = m.rho(eps).hi();
    for (int k = 0; k < 10; ++k) {
      const double e = lo + (hi - lo) * (k + 0.5) / 10.0;
      const cplx ref = oracle::gamma_limit(as_fn(m.rho(eps)), lo, hi, e);
      const cplx got = gamma_eps(m, eps, e);
      CHECK_MESSAGE(rel(got, ref) < 1e-6, "eps ", eps, " E ", e, " got ", got, " ref ", ref);
    }
  }
}

TEST_CASE("pole at a jump of the density is rejected") {
  const auto m = model_m1();
  CHECK_THROWS_AS(gamma_eps(m, 0, 1.0), DomainError);
}

TEST_CASE("thermal weights") {
  const auto m = model_m1();
  CHECK(weight_w(m, 0, 2.0) == doctest::Approx(0.0248935).epsilon(1e-6));
  CHECK(weight_w(m, 0, 2.0) == doctest::Approx(std::exp(-3.0) * 0.5).epsilon(1e-15));
  CHECK(weight_w(m, 1, 5.0) == doctest::Approx(std::exp(-5.0) * 0.5).epsilon(1e-15));
  for (double e : {1.5, 2.0, 2.9}) CHECK(n_eps(m, 0, e) * weight_w(m, 0, e) == doctest::Approx(1.0));
  CHECK_THROWS_AS(n_eps(m, 1, 2.0), DomainError);
  const SpectralModel alt(m.rho(0), m.rho(1), 1.0, 1.0, ThermalH::h1prime);
  CHECK(weight_w(alt, 0, 2.0) == doctest::Approx(std::exp(-2.0) * 0.5).epsilon(1e-15));
}

TEST_CASE("collision operator") {
  const auto m = model_m1();
  const SystemModel zero(CMatrix::Zero(2, 2));
  CHECK((t_eps_matrix(m, zero, 0, 2.0) - CMatrix::Identity(2, 2)).norm() < 1e-15);

  const auto s = system_m1();
  const cplx gg = gamma_eps(m, 0, 2.0) * gamma_eps(m, 1, 2.0);
  CMatrix expected = CMatrix::Identity(2, 2);
  expected(0, 0) = 1.0 / (1.0 + gg);
  CHECK((t_eps_matrix(m, s, 0, 2.0) - expected).norm() < 1e-14);

  std::mt19937 rng(5);
  std::normal_distribution<double> nd;
  CMatrix d(3, 3);
  for (int i = 0; i < 9; ++i) d(i / 3, i % 3) = cplx(nd(rng), nd(rng));
  const SystemModel r(d);
  const cplx z(0.3, -0.7);
  const CMatrix t = t_eps_matrix(r, 1, z);
  const CMatrix a = CMatrix::Identity(3, 3) + std::conj(z) * (r.d(1) * r.d(0)).adjoint();
  CHECK((t.adjoint() - a.inverse()).norm() < 1e-12);
}

TEST_CASE("singular collision operator is surfaced") {
  CMatrix d = CMatrix::Zero(2, 2);
  d(0, 1) = 1.0;
  CHECK_THROWS_AS(t_eps_matrix(SystemModel(d), 0, cplx(-1.0)), SingularCoefficientError);
}

TEST_CASE("damping operator of the desk model") {
  const auto m = model_m1();
  const auto s = system_m1();
  const CMatrix g = gamma_matrix(m, s);
  CHECK(std::abs(g(0, 1)) < 1e-14);
  CHECK(std::abs(g(1, 0)) < 1e-14);
  auto entry = [&](int band, double lo, double hi, bool part_re) {
    return oracle::simpson(
        [&](double e) {
          const cplx g0 = gamma_eps(m, 0, e), g1 = gamma_eps(m, 1, e);
          const cplx v = (band == 0 ? g1 : g0) * weight_w(m, band, e) / (1.0 + g0 * g1);
          return part_re ? v.real() : v.imag();
        },
        lo + 1e-12, hi - 1e-12, 10000);
  };
  const cplx g00(entry(0, 1, 3, true), entry(0, 1, 3, false));
  const cplx g11(entry(1, 4, 6, true), entry(1, 4, 6, false));
  CHECK(rel(g(0, 0), g00) < 1e-6);
  CHECK(rel(g(1, 1), g11) < 1e-6);
  CHECK(g(0, 0).real() > 0);
  CHECK(g(1, 1).real() > 0);
  MESSAGE("Gamma_00 = ", g(0, 0), "  Gamma_11 = ", g(1, 1));

  const SystemModel rotated(s.d(0) * std::polar(1.0, 0.9));
  CHECK((gamma_matrix(m, rotated) - g).norm() < 1e-13);
  CHECK(gamma_matrix(m, SystemModel(CMatrix::Zero(2, 2))).norm() == 0.0);
  CHECK(check_damping(g) >= -1e-10);
}

TEST_CASE("damping is non-negative on random valid models") {
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> u(0, 1);
  std::normal_distribution<double> nd;
  for (int trial = 0; trial < 50; ++trial) {
    const double c0 = 1 + 2 * u(rng);
    const double c1 = c0 + 2.5 + 2 * u(rng);
    const double w0 = 0.15 + 0.3 * u(rng), w1 = 0.15 + 0.3 * u(rng);
    const SpectralModel m(Density::gaussian(0.2 + u(rng), c0, w0, c0 - 1, c0 + 1),
                          Density::gaussian(0.2 + u(rng), c1, w1, c1 - 1, c1 + 1), 0.5 + u(rng),
                          2 * u(rng) - 1);
    const int n = 2 + trial % 3;
    CMatrix d(n, n);
    for (int i = 0; i < n * n; ++i) d(i / n, i % n) = 0.6 * cplx(nd(rng), nd(rng));
    CHECK(check_damping(gamma_matrix(m, SystemModel(d))) >= -1e-10);
  }
}

TEST_CASE("decay curve") {
  const auto m = model_m1();
  const CMatrix g = gamma_matrix(m, system_m1());
  std::vector<double> times;
  for (int t = 0; t <= 10; ++t) times.push_back(t);
  const auto curve = decay_curve(g, times);
  CHECK((curve[0].u - CMatrix::Identity(2, 2)).norm() == 0.0);
  for (std::size_t i = 0; i < curve.size(); ++i) {
    CHECK(std::abs(curve[i].u(0, 0) - std::exp(-g(0, 0) * times[i])) < 1e-12);
    CHECK(std::abs(curve[i].u(1, 1) - std::exp(-g(1, 1) * times[i])) < 1e-12);
    if (i > 0) CHECK(curve[i].norm <= curve[i - 1].norm + 1e-15);
    for (std::size_t j = 0; i + j < curve.size(); ++j) {
      CHECK((curve[i].u * curve[j].u - curve[i + j].u).norm() < 1e-10);
    }
  }
  const auto flat = decay_curve(CMatrix::Zero(3, 3), {0.0, 4.0});
  CHECK((flat[1].u - CMatrix::Identity(3, 3)).norm() == 0.0);
  CHECK_THROWS_AS(decay_curve(g, {-1.0}), ValidationError);
}

TEST_CASE("thermal inner product") {
  const auto m = model_m1();
  CHECK(beta_inner(m, {0, {}}, {0, {}}, {1, {}}, {1, {}}) == cplx(0));
  CHECK(std::abs(beta_inner(m, {0, {}}, {1, {}}, {0, {}}, {1, {}})) == 0.0);
  const double ref =
      2 * pi * oracle::simpson([&](double e) { return m.rho(0)(e) * weight_w(m, 0, e); }, 1, 3, 4000);
  CHECK(beta_inner(m, {0, {}}, {0, {}}, {0, {}}, {0, {}}).real() == doctest::Approx(ref).epsilon(1e-9));
  CHECK(beta_inner(m, {0, 2.0}, {0, {}}, {0, {}}, {0, {}}).real() ==
        doctest::Approx(2 * pi * 0.5 * weight_w(m, 0, 2.0)));
  CHECK_THROWS_AS(beta_inner(m, {0, 2.0}, {0, {}}, {0, 2.0}, {0, {}}), ValidationError);
}

TEST_CASE("model validation") {
  CHECK_THROWS_AS(SpectralModel(Density::gaussian(1, 2, 0.3, 1, 3), Density::gaussian(1, 3, 0.3, 2.5, 4), 1, 1),
                  ValidationError);
  CHECK_THROWS_AS(SpectralModel(Density::zero(), Density::zero(), 0.0, 1), ValidationError);
  CHECK_THROWS_AS(Density::gaussian(-1, 2, 0.3, 1, 3), ValidationError);
  CMatrix d = CMatrix::Zero(2, 2);
  d(1, 0) = 1.0;
  CHECK_THROWS_AS(SystemModel(d, {0, 1}), ValidationError);
  CHECK_NOTHROW(SystemModel(d, {1, 0}));
}

TEST_CASE("tabulated density") {
  std::vector<double> e, v;
  for (int i = 0; i <= 40; ++i) {
    e.push_back(1 + i * 0.05);
    v.push_back(0.5 * std::exp(-std::pow((e.back() - 2) / 0.3, 2)));
  }
  const Density tab = Density::table(e, v);
  CHECK(tab(2.0) == doctest::Approx(0.5));
  CHECK(tab(0.5) == 0.0);
  const SpectralModel m(tab, Density::gaussian(0.5, 5, 0.3, 4, 6), 1, 1);
  const cplx g = gamma_eps(m, 0, 2.3);
  const cplx ref = gamma_eps(model_m1(), 0, 2.3);
  CHECK(std::abs(g - ref) < 5e-3);
  CHECK_THROWS_AS(Density::table({1, 2, 2, 3}, {0, 1, 1, 0}), ValidationError);
}

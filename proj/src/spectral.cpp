#include "ldl/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

// the Boost 1.74 pchip header calls isnan unqualified
using std::isnan;
#include <boost/math/interpolators/pchip.hpp>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <unsupported/Eigen/MatrixFunctions>

#include "ldl/errors.hpp"

namespace ldl {

namespace {

constexpr double pi = std::numbers::pi;

}  // namespace

// ---------------------------------------------------------------- densities

Density Density::gaussian(double amplitude, double center, double width, double lo, double hi) {
  if (!(amplitude >= 0)) throw ValidationError("density amplitude must be non-negative");
  if (!(width > 0)) throw ValidationError("density width must be positive");
  if (!(lo < hi)) throw ValidationError("density support must satisfy lo < hi");
  Density d;
  d.kind_ = Kind::gaussian;
  d.amplitude_ = amplitude;
  d.center_ = center;
  d.width_ = width;
  d.lo_ = lo;
  d.hi_ = hi;
  return d;
}

Density Density::table(std::vector<double> energy, std::vector<double> value) {
  if (energy.size() != value.size() || energy.size() < 4) {
    throw ValidationError("density table needs at least four (energy, value) pairs");
  }
  for (std::size_t i = 1; i < energy.size(); ++i) {
    if (!(energy[i] > energy[i - 1])) throw ValidationError("density table energies must increase");
  }
  for (double v : value) {
    if (!(v >= 0) || !std::isfinite(v)) throw ValidationError("density table values must be finite and >= 0");
  }
  Density d;
  d.kind_ = Kind::table;
  d.lo_ = energy.front();
  d.hi_ = energy.back();
  auto spline = boost::math::interpolators::pchip(std::move(energy), std::move(value));
  d.table_ = [spline](double e) { return std::max(0.0, spline(e)); };
  return d;
}

Density Density::zero() { return Density{}; }

double Density::operator()(double e) const {
  if (kind_ == Kind::zero || e < lo_ || e > hi_) return 0.0;
  if (kind_ == Kind::gaussian) {
    const double x = (e - center_) / width_;
    return amplitude_ * std::exp(-x * x);
  }
  return table_(e);
}

// ---------------------------------------------------------------- models

SpectralModel::SpectralModel(Density rho0, Density rho1, double beta, double omega0,
                             ThermalH thermal, Quadrature quad)
    : rho_{std::move(rho0), std::move(rho1)},
      beta_(beta),
      omega0_(omega0),
      thermal_(thermal),
      quad_(quad) {
  if (!(beta > 0) || !std::isfinite(beta)) throw ValidationError("beta must be positive and finite");
  if (!std::isfinite(omega0)) throw ValidationError("omega0 must be finite");
  if (!(quad.rel_tol > 0) || quad.max_depth < 1) throw ValidationError("invalid quadrature settings");
  const auto& a = rho_[0];
  const auto& b = rho_[1];
  if (!a.empty() && !b.empty() && a.lo() <= b.hi() && b.lo() <= a.hi()) {
    throw ValidationError("band supports overlap: the two densities must have disjoint supports");
  }
}

SystemModel::SystemModel(CMatrix d) : d_(std::move(d)) {
  if (d_.rows() != d_.cols() || d_.rows() == 0) throw ValidationError("D must be a non-empty square matrix");
  if (!d_.allFinite()) throw ValidationError("D must have finite entries");
  d_adj_ = d_.adjoint();
}

SystemModel::SystemModel(CMatrix d, std::pair<int, int> levels) : SystemModel(std::move(d)) {
  const auto [e0, e1] = levels;
  if (e0 < 0 || e1 < 0 || e0 >= dim() || e1 >= dim() || e0 == e1) {
    throw ValidationError("rotating-wave levels out of range");
  }
  CMatrix rest = d_;
  rest(e0, e1) = 0;
  if (rest.norm() > 1e-12 * std::max(1.0, d_.norm())) {
    throw ValidationError("D is not proportional to |e0><e1|: rotating-wave condition violated");
  }
}

SpectralModel model_m1() {
  return SpectralModel(Density::gaussian(0.5, 2.0, 0.3, 1.0, 3.0),
                       Density::gaussian(0.5, 5.0, 0.3, 4.0, 6.0), 1.0, 1.0);
}

SystemModel system_m1() {
  CMatrix d = CMatrix::Zero(2, 2);
  d(0, 1) = 1.0;
  return SystemModel(d, {0, 1});
}

// ---------------------------------------------------------------- quadrature

namespace {

template <class V, class Norm>
struct Adaptive {
  const std::function<V(double)>& f;
  const Quadrature& q;
  Norm norm;

  // Kronrod estimate and error on [a,b]
  std::pair<V, double> rule(double a, double b) const {
    using GK = boost::math::quadrature::gauss_kronrod<double, 15>;
    using G = boost::math::quadrature::gauss<double, 7>;
    const auto& xk = GK::abscissa();
    const auto& wk = GK::weights();
    const auto& wg = G::weights();
    const double c = 0.5 * (a + b);
    const double h = 0.5 * (b - a);
    // even Kronrod indices carry the embedded Gauss nodes
    V fc = f(c);
    V k = fc * wk[0];
    V g = fc * wg[0];
    for (std::size_t i = 1; i < xk.size(); ++i) {
      V s = f(c - h * xk[i]) + f(c + h * xk[i]);
      k = k + s * wk[i];
      if (i % 2 == 0) g = g + s * wg[i / 2];
    }
    k = k * h;
    g = g * h;
    return {k, norm(k - g)};
  }

  V run(double a, double b, double& err) const {
    auto [total, e] = rule(a, b);
    err = e;
    return refine(a, b, total, e, q.max_depth, err);
  }

  V refine(double a, double b, const V& whole, double e, int depth, double& err) const {
    const double scale = std::max(q.abs_tol, q.rel_tol * norm(whole));
    if (e <= scale || depth == 0) {
      err = e;
      return whole;
    }
    const double m = 0.5 * (a + b);
    auto [l, el] = rule(a, m);
    auto [r, er] = rule(m, b);
    double e1 = 0, e2 = 0;
    V lv = refine(a, m, l, el, depth - 1, e1);
    V rv = refine(m, b, r, er, depth - 1, e2);
    err = e1 + e2;
    return lv + rv;
  }
};

}  // namespace

double integrate(const std::function<double(double)>& f, double a, double b, const Quadrature& q) {
  if (a == b) return 0.0;
  auto norm = [](double x) { return std::abs(x); };
  Adaptive<double, decltype(norm)> ad{f, q, norm};
  double err = 0;
  const double v = ad.run(a, b, err);
  if (!std::isfinite(v) || err > 10 * std::max(q.abs_tol, q.rel_tol * std::abs(v))) {
    throw ToleranceError("quadrature on [" + std::to_string(a) + ", " + std::to_string(b) +
                         "] did not reach tolerance: estimate " + std::to_string(v) + ", error " +
                         std::to_string(err));
  }
  return v;
}

CMatrix integrate_matrix(const std::function<CMatrix(double)>& f, double a, double b,
                         const Quadrature& q) {
  auto norm = [](const CMatrix& x) { return x.cwiseAbs().maxCoeff(); };
  Adaptive<CMatrix, decltype(norm)> ad{f, q, norm};
  double err = 0;
  CMatrix v = ad.run(a, b, err);
  if (!v.allFinite() || err > 10 * std::max(q.abs_tol, q.rel_tol * norm(v))) {
    throw ToleranceError("matrix quadrature on [" + std::to_string(a) + ", " + std::to_string(b) +
                         "] did not reach tolerance: error " + std::to_string(err));
  }
  return v;
}

// ---------------------------------------------------------------- scalars

cplx plemelj(const std::function<double(double)>& rho, double a, double b, double e,
             const Quadrature& q) {
  if (!std::isfinite(e)) throw DomainError("energy must be finite");
  if (!(a < b)) return 0.0;
  // int rho(x)/(x-e) over [lo,hi] on one side of e, in the variable s = log|x-e|
  auto one_side = [&](double lo, double hi) {
    if (!(lo < hi)) return 0.0;
    if (lo >= e) {
      return integrate([&](double s) { return rho(e + std::exp(s)); }, std::log(lo - e),
                       std::log(hi - e), q);
    }
    return -integrate([&](double s) { return rho(e - std::exp(s)); }, std::log(e - hi),
                      std::log(e - lo), q);
  };
  double pv = 0;
  double here = 0;
  if (e < a || e > b) {
    pv = one_side(a, b);
  } else if (e == a || e == b) {
    here = rho(e);
    if (here != 0.0) {
      throw DomainError("principal value diverges at a support edge where the density jumps");
    }
    pv = e == a ? one_side(std::nextafter(a, b), b) : one_side(a, std::nextafter(b, a));
  } else {
    here = rho(e);
    // symmetric window around the pole, regular remainder outside it
    const double h = std::min(e - a, b - e);
    pv = integrate([&](double u) { return (rho(e + u) - rho(e - u)) / u; }, 0.0, h, q);
    pv += one_side(e + h, b) + one_side(a, e - h);
  }
  return {pi * here, -pv};
}

cplx gamma_eps(const SpectralModel& m, int eps, double e) {
  if (eps != 0 && eps != 1) throw ValidationError("band label must be 0 or 1");
  if (!std::isfinite(e)) throw DomainError("energy must be finite");
  const Density& rho = m.rho(eps);
  if (rho.empty()) return 0.0;
  return plemelj([&](double x) { return rho(x); }, rho.lo(), rho.hi(), e, m.quad());
}

double weight_w(const SpectralModel& m, int eps, double e) {
  if (eps != 0 && eps != 1) throw ValidationError("band label must be 0 or 1");
  const double shift = (m.thermal() == ThermalH::h1 && eps == 0) ? m.omega0() : 0.0;
  return std::exp(-m.beta() * (e + shift)) * m.rho(eps)(e);
}

double n_eps(const SpectralModel& m, int eps, double e) {
  const double w = weight_w(m, eps, e);
  if (!(w > 0)) throw DomainError("number intensity requested outside the support of the band");
  return 1.0 / w;
}

// ---------------------------------------------------------------- matrices

CMatrix t_eps_matrix(const SystemModel& s, int eps, cplx gg) {
  const int n = s.dim();
  const CMatrix id = CMatrix::Identity(n, n);
  const CMatrix a = id + gg * s.d(eps) * s.d(1 - eps);
  Eigen::PartialPivLU<CMatrix> lu(a);
  const double rcond = lu.rcond();
  if (!(rcond > 1e-13)) {
    throw SingularCoefficientError("1 + gamma*gamma*D*D is singular (rcond " + std::to_string(rcond) + ")");
  }
  CMatrix t = lu.solve(id);
  const double res = (a * t - id).norm();
  if (!(res <= 1e-12 * std::max(1.0, a.norm() * t.norm()))) {
    throw ToleranceError("collision operator solve residual " + std::to_string(res));
  }
  return t;
}

CMatrix t_eps_matrix(const SpectralModel& m, const SystemModel& s, int eps, double e) {
  return t_eps_matrix(s, eps, gamma_eps(m, eps, e) * gamma_eps(m, 1 - eps, e));
}

CMatrix gamma_integrand(const SpectralModel& m, const SystemModel& s, double e) {
  const int n = s.dim();
  CMatrix out = CMatrix::Zero(n, n);
  for (int eps = 0; eps < 2; ++eps) {
    const double w = weight_w(m, eps, e);
    if (w == 0.0) continue;
    const cplx g_own = gamma_eps(m, eps, e);
    const cplx g_other = gamma_eps(m, 1 - eps, e);
    out += (g_other * w) * s.d(eps) * s.d(1 - eps) * t_eps_matrix(s, eps, g_own * g_other);
  }
  return out;
}

CMatrix gamma_matrix(const SpectralModel& m, const SystemModel& s) {
  const int n = s.dim();
  CMatrix out = CMatrix::Zero(n, n);
  Quadrature q = m.quad();
  q.abs_tol = std::max(q.abs_tol, 1e-15);
  for (int eps = 0; eps < 2; ++eps) {
    const Density& rho = m.rho(eps);
    if (rho.empty()) continue;
    out += integrate_matrix([&](double e) { return gamma_integrand(m, s, e); }, rho.lo(), rho.hi(), q);
  }
  return out;
}

double check_damping(const CMatrix& g) {
  if (g.rows() != g.cols()) throw ValidationError("damping check needs a square matrix");
  if (g.size() == 0) return 0.0;
  const CMatrix h = 0.5 * (g + g.adjoint());
  Eigen::SelfAdjointEigenSolver<CMatrix> es(h, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

std::vector<DecayPoint> decay_curve(const CMatrix& g, const std::vector<double>& times) {
  if (g.rows() != g.cols()) throw ValidationError("decay curve needs a square matrix");
  std::vector<DecayPoint> out;
  out.reserve(times.size());
  for (double t : times) {
    if (!(t >= 0) || !std::isfinite(t)) throw ValidationError("decay times must be finite and >= 0");
    CMatrix u = (-t * g).exp();
    Eigen::JacobiSVD<CMatrix> svd(u);
    const double norm = u.size() ? svd.singularValues()(0) : 0.0;
    out.push_back({t, std::move(u), norm});
  }
  return out;
}

cplx beta_inner(const SpectralModel& m, const FormVector& a, const FormVector& b,
                const FormVector& c, const FormVector& d) {
  for (const auto* v : {&a, &b, &c, &d}) {
    if (v->eps != 0 && v->eps != 1) throw ValidationError("form vector band must be 0 or 1");
  }
  const int localized = a.energy.has_value() + b.energy.has_value() + c.energy.has_value() +
                        d.energy.has_value();
  if (localized > 1) {
    throw ValidationError("thermal inner product with more than one energy localization is a distribution");
  }
  if (a.eps != c.eps || b.eps != d.eps) return 0.0;
  std::optional<double> at;
  for (const auto* v : {&a, &b, &c, &d}) {
    if (v->energy) at = v->energy;
  }
  auto integrand = [&](double e) { return m.rho(a.eps)(e) * weight_w(m, b.eps, e); };
  if (at) return 2 * pi * integrand(*at);
  const Density& ra = m.rho(a.eps);
  const Density& rb = m.rho(b.eps);
  if (ra.empty() || rb.empty()) return 0.0;
  const double lo = std::max(ra.lo(), rb.lo());
  const double hi = std::min(ra.hi(), rb.hi());
  if (!(lo < hi)) return 0.0;
  return 2 * pi * integrate(integrand, lo, hi, m.quad());
}

}  // namespace ldl

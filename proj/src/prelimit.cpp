#include "ldl/prelimit.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include <boost/math/quadrature/gauss.hpp>

#include "ldl/errors.hpp"

namespace ldl {

namespace {

constexpr double pi = std::numbers::pi;

struct Rule {
  std::vector<double> x;  // on [-1, 1]
  std::vector<double> w;
};

template <int N>
Rule gauss_rule() {
  const auto& xs = boost::math::quadrature::gauss<double, N>::abscissa();
  const auto& ws = boost::math::quadrature::gauss<double, N>::weights();
  Rule r;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (xs[i] == 0.0) {
      r.x.push_back(0.0);
      r.w.push_back(ws[i]);
      continue;
    }
    r.x.push_back(-xs[i]);
    r.w.push_back(ws[i]);
    r.x.push_back(xs[i]);
    r.w.push_back(ws[i]);
  }
  return r;
}

const Rule& rule(int n) {
  static const Rule r20 = gauss_rule<20>();
  static const Rule r15 = gauss_rule<15>();
  return n == 20 ? r20 : r15;
}

// Composite rule on [a, b] with `panels` equal panels; weights carry the function values.
struct Nodes {
  std::vector<double> x;
  std::vector<double> w;
};

Nodes composite(const std::function<double(double)>& f, double a, double b, int panels, const Rule& r) {
  Nodes n;
  const double h = (b - a) / panels;
  for (int p = 0; p < panels; ++p) {
    const double c = a + (p + 0.5) * h;
    for (std::size_t i = 0; i < r.x.size(); ++i) {
      const double x = c + 0.5 * h * r.x[i];
      n.x.push_back(x);
      n.w.push_back(0.5 * h * r.w[i] * f(x));
    }
  }
  return n;
}

cplx transform(const Nodes& n, double u) {
  cplx s = 0;
  for (std::size_t j = 0; j < n.x.size(); ++j) s += n.w[j] * std::polar(1.0, u * n.x[j]);
  return s;
}

int panels_for(double length, double frequency) {
  return static_cast<int>(std::ceil(length * frequency / 8.0)) + 4;
}

cplx kernel_with_rule(const TestFunctionPair& p, double lambda, KernelMode mode, const PrelimitOptions& opt,
                      const Rule& r) {
  const double a = p.phi.width * p.phi.width;
  const double b = p.psi.width * p.psi.width;
  const double c = a + b;
  const double shift = p.phi.center - p.psi.center;
  double s_lo = -shift - opt.tail * std::sqrt(c);
  double s_hi = -shift + opt.tail * std::sqrt(c);
  if (mode == KernelMode::simplex) s_hi = std::min(s_hi, 0.0);
  if (!(s_lo < s_hi)) return 0.0;
  const double l2 = lambda * lambda;
  const double u_lo = s_lo / l2;
  const double u_hi = s_hi / l2;
  const double u_max = std::max(std::abs(u_lo), std::abs(u_hi));

  const Nodes fn = composite(p.f.f, p.f.lo, p.f.hi, panels_for(p.f.hi - p.f.lo, u_max), r);
  const Nodes gn = composite(p.g.f, p.g.lo, p.g.hi, panels_for(p.g.hi - p.g.lo, u_max), r);
  const double freq = std::max(std::abs(p.f.hi - p.g.lo), std::abs(p.g.hi - p.f.lo));
  const double time_freq = std::sqrt(2.0 / c) * l2 * 4.0;
  const int u_panels = panels_for(u_hi - u_lo, std::max(freq, time_freq));

  cplx total = 0;
  const double h = (u_hi - u_lo) / u_panels;
  for (int q = 0; q < u_panels; ++q) {
    const double mid = u_lo + (q + 0.5) * h;
    for (std::size_t i = 0; i < r.x.size(); ++i) {
      const double u = mid + 0.5 * h * r.x[i];
      const cplx fhat = transform(fn, u) * std::conj(transform(gn, u));
      total += 0.5 * h * r.w[i] * overlap(p.phi, p.psi, l2 * u) * fhat;
    }
  }
  return total;
}

void validate(const TestFunctionPair& p) {
  if (!(p.phi.width > 0) || !(p.psi.width > 0)) throw ValidationError("time test functions need positive widths");
  if (!std::isfinite(p.phi.center) || !std::isfinite(p.psi.center)) {
    throw ValidationError("time test functions need finite centers");
  }
  for (const auto* e : {&p.f, &p.g}) {
    if (!e->empty() && !e->f) throw ValidationError("energy test function is missing");
  }
}

}  // namespace

double TimeGaussian::operator()(double t) const {
  const double z = (t - center) / width;
  return std::exp(-z * z);
}

EnergyFunction EnergyFunction::of(const Density& d) {
  if (d.empty()) return {};
  return {[d](double e) { return d(e); }, d.lo(), d.hi()};
}

double overlap(const TimeGaussian& phi, const TimeGaussian& psi, double s) {
  const double a = phi.width * phi.width;
  const double b = psi.width * psi.width;
  const double z = phi.center - psi.center + s;
  return std::sqrt(pi * a * b / (a + b)) * std::exp(-z * z / (a + b));
}

cplx kernel_value(const TestFunctionPair& p, double lambda, KernelMode mode, const PrelimitOptions& opt) {
  validate(p);
  if (!(lambda > 0)) throw ValidationError("lambda must be positive");
  if (p.f.empty() || p.g.empty()) return 0.0;
  const cplx fine = kernel_with_rule(p, lambda, mode, opt, rule(20));
  const cplx coarse = kernel_with_rule(p, lambda, mode, opt, rule(15));
  const double err = std::abs(fine - coarse);
  if (!std::isfinite(err) || err > std::max(opt.abs_tol, opt.rel_tol * std::abs(fine))) {
    throw ConvergenceError("oscillatory quadrature failed at lambda " + std::to_string(lambda) +
                           " (node-rule discrepancy " + std::to_string(err) + ")");
  }
  return fine;
}

cplx kernel_limit(const TestFunctionPair& p, KernelMode mode, const Quadrature& q) {
  validate(p);
  if (p.f.empty() || p.g.empty()) return 0.0;
  const double at_zero = overlap(p.phi, p.psi, 0.0);
  if (mode == KernelMode::full) {
    const double lo = std::max(p.f.lo, p.g.lo);
    const double hi = std::min(p.f.hi, p.g.hi);
    if (!(lo < hi)) return 0.0;
    return at_zero * 2 * pi * integrate([&](double e) { return p.f.f(e) * p.g.f(e); }, lo, hi, q);
  }
  // g(E) (pi f(E) - i PV int f(E')/(E'-E)), split where f jumps
  std::vector<double> cuts{p.g.lo};
  for (double e : {p.f.lo, p.f.hi}) {
    if (e > p.g.lo && e < p.g.hi) cuts.push_back(e);
  }
  cuts.push_back(p.g.hi);
  std::sort(cuts.begin(), cuts.end());
  cplx total = 0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const CMatrix v = integrate_matrix(
        [&](double e) {
          CMatrix m(1, 1);
          m(0, 0) = p.g.f(e) * plemelj(p.f.f, p.f.lo, p.f.hi, e, q);
          return m;
        },
        cuts[i], cuts[i + 1], q);
    total += v(0, 0);
  }
  return at_zero * total;
}

std::vector<LimitPoint> kernel_limit_check(const TestFunctionPair& p, const std::vector<double>& lambdas,
                                           KernelMode mode, const PrelimitOptions& opt) {
  for (std::size_t i = 0; i < lambdas.size(); ++i) {
    if (!(lambdas[i] > 0)) throw ValidationError("lambdas must be positive");
    if (i > 0 && !(lambdas[i] < lambdas[i - 1])) throw ValidationError("lambdas must be decreasing");
  }
  const cplx limit = kernel_limit(p, mode);
  std::vector<LimitPoint> out;
  for (double lambda : lambdas) {
    LimitPoint pt;
    pt.lambda = lambda;
    try {
      pt.value = kernel_value(p, lambda, mode, opt);
    } catch (const ConvergenceError& e) {
      const std::string reached = out.empty() ? "none" : std::to_string(out.back().lambda);
      throw ConvergenceError(std::string(e.what()) + "; smallest lambda reached: " + reached);
    }
    pt.limit = limit;
    pt.abs_error = std::abs(pt.value - limit);
    pt.error = std::abs(limit) > 0 ? pt.abs_error / std::abs(limit) : pt.abs_error;
    pt.flagged = !out.empty() && !(pt.error < out.back().error);
    out.push_back(pt);
  }
  return out;
}

bool sweep_converges(const std::vector<LimitPoint>& points) {
  return std::count_if(points.begin(), points.end(), [](const LimitPoint& p) { return p.flagged; }) <= 1;
}

LimitPoint prelimit_two_point(const SpectralModel& m, double lambda, const TwoPointLabels& labels,
                              const PrelimitOptions& opt) {
  for (int e : labels.eps) {
    if (e != 0 && e != 1) throw ValidationError("band label must be 0 or 1");
  }
  LimitPoint pt;
  pt.lambda = lambda;
  if (labels.eps[0] != labels.eps[2] || labels.eps[1] != labels.eps[3]) return pt;

  const int e1 = labels.eps[0];
  const int e2 = labels.eps[1];
  auto product = [&](const EnergyFunction& a, const EnergyFunction& b, const Density& rho,
                     std::function<double(double)> weight) {
    EnergyFunction out;
    if (a.empty() || b.empty() || rho.empty()) return out;
    out.lo = std::max({a.lo, b.lo, rho.lo()});
    out.hi = std::min({a.hi, b.hi, rho.hi()});
    if (!(out.lo < out.hi)) return EnergyFunction{};
    out.f = [a, b, weight](double e) { return a.f(e) * b.f(e) * weight(e); };
    return out;
  };
  TestFunctionPair p;
  p.phi = labels.phi;
  p.psi = labels.psi;
  const Density& rho1 = m.rho(e1);
  p.f = product(labels.f[0], labels.f[2], rho1, [rho1](double e) { return rho1(e); });
  p.g = product(labels.f[1], labels.f[3], m.rho(e2), [m, e2](double e) { return weight_w(m, e2, e); });

  pt.value = kernel_value(p, lambda, KernelMode::simplex, opt);
  pt.limit = kernel_limit(p, KernelMode::simplex, m.quad());
  pt.abs_error = std::abs(pt.value - pt.limit);
  pt.error = std::abs(pt.limit) > 0 ? pt.abs_error / std::abs(pt.limit) : pt.abs_error;
  return pt;
}

EnergyFunction band_bump(const Density& band, double shift, double width) {
  if (band.empty()) return {};
  const double len = band.hi() - band.lo();
  const double c = 0.5 * (band.lo() + band.hi()) + shift * len;
  return EnergyFunction::of(Density::gaussian(1.0, c, width * len, band.lo(), band.hi()));
}

TestFunctionPair standard_pair(const SpectralModel& m, KernelMode mode) {
  const Density& second = mode == KernelMode::full ? m.rho(0) : m.rho(1);
  return {{0, 1}, {0.3, 1.2}, band_bump(m.rho(0), 0, 0.15), band_bump(second, 0, 0.15)};
}

TwoPointLabels standard_two_point(const SpectralModel& m) {
  TwoPointLabels l;
  l.eps = {0, 1, 0, 1};
  l.f = {band_bump(m.rho(0), 0, 0.25), band_bump(m.rho(1), 0, 0.25), band_bump(m.rho(0), 0.05, 0.3),
         band_bump(m.rho(1), -0.05, 0.3)};
  l.phi = {0, 1};
  l.psi = {0.2, 1};
  return l;
}

}  // namespace ldl

#include "ldl/checks.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <thread>

#include "ldl/errors.hpp"
#include "ldl/golden_rule.hpp"
#include "ldl/noise_algebra.hpp"
#include "ldl/prelimit.hpp"

namespace ldl {

namespace {

using Rng = std::mt19937_64;

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

CheckItem at_most(std::string name, double value, double bound, std::string detail = {}) {
  return {std::move(name), value, bound, value <= bound, std::move(detail)};
}

algebra::Generator random_generator(Rng& rng, algebra::GenKind kind, const std::string& suffix,
                                    const std::string& time) {
  std::uniform_int_distribution<int> bit(0, 1);
  std::vector<std::string> e;
  if (bit(rng) == 1) {
    e = {"E" + suffix};
  } else {
    e = {"E" + suffix + "a", "E" + suffix + "b"};
  }
  const int e1 = bit(rng);
  const int e2 = bit(rng);
  return algebra::Generator::make(kind, e1, e2, e, time);
}

CMatrix random_matrix(Rng& rng, int n, double scale) {
  std::normal_distribution<double> nd;
  CMatrix d(n, n);
  for (int i = 0; i < n * n; ++i) {
    const double re = nd(rng);
    const double im = nd(rng);
    d(i / n, i % n) = scale * cplx(re, im);
  }
  return d;
}

// |gamma| in [0.05, 10], Re gamma > 0, w in [0.1, 1.1)
Instantiation random_instantiation(Rng& rng) {
  std::uniform_real_distribution<double> u(0, 1);
  Instantiation in;
  for (int e = 0; e < 2; ++e) {
    const double r = 0.05 + 9.95 * u(rng);
    const double phase = (u(rng) - 0.5) * 3.1;
    in.gamma[e] = std::polar(r, phase);
    in.w[e] = 0.1 + u(rng);
  }
  return in;
}

}  // namespace

CheckItem check_algebra(std::uint64_t seed, int trials) {
  using namespace algebra;
  Rng rng(seed);
  int failures = 0;
  int cases = 0;
  std::string first;
  const GenKind kinds[] = {GenKind::B, GenKind::Bdag, GenKind::N};
  for (int trial = 0; trial < trials; ++trial) {
    for (GenKind ka : kinds) {
      for (GenKind kb : kinds) {
        const Generator a = random_generator(rng, ka, "1", "t");
        const Generator b = random_generator(rng, kb, "2", "t'");
        ++cases;
        std::string what;
        try {
          const Expr ab = commutator(a, b, Mode::causal);
          if (!equivalent(ab, -commutator(b, a, Mode::causal))) {
            what = "antisymmetry";
          } else if (!equivalent(to_symmetric(ab), commutator(a, b, Mode::symmetric))) {
            what = "mode coherence";
          } else {
            const Expr ga = Expr::of(a), gb = Expr::of(b);
            const Expr rev = normal_order(adjoint(gb) * adjoint(ga) - adjoint(ga) * adjoint(gb), Mode::causal);
            if (!equivalent(adjoint(ab), rev)) what = "adjoint covariance";
          }
        } catch (const AlgebraError& e) {
          what = std::string("algebra error: ") + e.what();
        }
        if (!what.empty()) {
          ++failures;
          if (first.empty()) first = what + " for " + serialize(Expr::of(a)) + ", " + serialize(Expr::of(b));
        }
      }
    }
  }
  return at_most("algebra", failures, 0,
                 std::to_string(cases) + " pairs" + (first.empty() ? "" : "; first failure: " + first));
}

CheckItem check_fixed_points(std::uint64_t seed, int trials, int max_dim) {
  Rng rng(seed);
  double worst2 = 0, worst3 = 0;
  for (int trial = 0; trial < trials; ++trial) {
    const SystemModel s(random_matrix(rng, 1 + trial % max_dim, 1.0));
    const Instantiation in = random_instantiation(rng);
    worst2 = std::max(worst2, verify_theorem2(s, in));
    worst3 = std::max(worst3, verify_theorem3(s, in));
  }
  return at_most("fixed_points", std::max(worst2, worst3), 1e-12,
                 "annihilator " + sci(worst2) + ", number " + sci(worst3));
}

CheckItem check_collision_identity(std::uint64_t seed, int trials, int max_dim) {
  Rng rng(seed);
  double worst = 0;
  for (int trial = 0; trial < trials; ++trial) {
    const SystemModel s(random_matrix(rng, 1 + trial % max_dim, 1.0));
    const Instantiation in = random_instantiation(rng);
    worst = std::max(worst, verify_te_identity(s, in.gamma[0], in.gamma[1]));
  }
  return at_most("collision_identity", worst, 1e-12);
}

CheckItem check_damping_suite(const SpectralModel& m, const SystemModel& s, std::uint64_t seed, int random_models) {
  double lowest = check_damping(gamma_matrix(m, s));
  const double own = lowest;
  Rng rng(seed);
  std::uniform_real_distribution<double> u(0, 1);
  for (int trial = 0; trial < random_models; ++trial) {
    const double c0 = 1 + 2 * u(rng);
    const double c1 = c0 + 2.5 + 2 * u(rng);
    const double w0 = 0.15 + 0.3 * u(rng);
    const double w1 = 0.15 + 0.3 * u(rng);
    const double a0 = 0.2 + u(rng);
    const double a1 = 0.2 + u(rng);
    const double beta = 0.5 + u(rng);
    const double omega0 = 2 * u(rng) - 1;
    const SpectralModel r(Density::gaussian(a0, c0, w0, c0 - 1, c0 + 1), Density::gaussian(a1, c1, w1, c1 - 1, c1 + 1),
                          beta, omega0);
    const SystemModel d(random_matrix(rng, 2 + trial % 3, 0.6));
    lowest = std::min(lowest, check_damping(gamma_matrix(r, d)));
  }
  CheckItem item{"damping", lowest, -1e-10, lowest >= -1e-10,
                 "configured model " + sci(own) + ", " + std::to_string(random_models) + " random models"};
  return item;
}

CheckItem check_decay(const SpectralModel& m, const SystemModel& s, double tmax) {
  const CMatrix g = gamma_matrix(m, s);
  std::vector<double> times;
  const int steps = 40;
  for (int i = 0; i <= steps; ++i) times.push_back(tmax * i / steps);
  const auto curve = decay_curve(g, times);
  double residual = 0;
  for (int i = 0; i <= steps; ++i) {
    for (int j = 0; i + j <= steps; ++j) {
      const CMatrix prod = curve[i].u * curve[j].u;
      residual = std::max(residual, (curve[i + j].u - prod).cwiseAbs().maxCoeff());
    }
  }
  CheckItem item = at_most("decay", residual, 1e-10, "semigroup residual " + sci(residual));
  CMatrix off = g;
  off.diagonal().setZero();
  if (off.cwiseAbs().maxCoeff() == 0.0) {
    bool monotone = true;
    for (int k = 0; k < g.rows(); ++k) {
      if (!(g(k, k).real() > 0)) continue;
      for (int i = 1; i <= steps; ++i) {
        monotone = monotone && std::abs(curve[i].u(k, k)) < std::abs(curve[i - 1].u(k, k));
      }
    }
    item.passed = item.passed && monotone;
    item.detail += monotone ? "; diagonal, strictly decreasing" : "; diagonal entry not decreasing";
  } else {
    item.detail += "; not diagonal";
  }
  return item;
}

CheckItem check_prelimit(const SpectralModel& m) {
  const std::vector<double> lambdas{1.0, 0.5, 0.25, 0.125};
  double worst = 0;
  bool decreasing = true;
  std::string detail;
  auto sweep = [&](const std::string& label, KernelMode mode) {
    const auto pts = kernel_limit_check(standard_pair(m, mode), lambdas, mode);
    for (const auto& pt : pts) decreasing = decreasing && !pt.flagged;
    worst = std::max(worst, pts.back().error);
    detail += label + " " + sci(pts.back().error) + "; ";
  };
  sweep("full", KernelMode::full);
  sweep("simplex", KernelMode::simplex);

  const TwoPointLabels l = standard_two_point(m);
  double prev = INFINITY;
  double last = 0;
  for (double lambda : lambdas) {
    last = prelimit_two_point(m, lambda, l).error;
    decreasing = decreasing && last < prev;
    prev = last;
  }
  worst = std::max(worst, last);
  detail += "two-point " + sci(last);
  CheckItem item = at_most("prelimit", worst, 5e-2, detail);
  item.passed = item.passed && decreasing;
  if (!decreasing) item.detail += "; errors not decreasing";
  return item;
}

CheckItem check_scattering(const SpectralModel& m, const SystemModel& s, int points) {
  const GridSpace grid(m, points);
  const CrossCheck c = cross_check(grid, s);
  using Table = std::array<std::array<CMatrix, 2>, 2>;
  std::vector<Table> dyn, spec;
  for (int n : {points / 4, points / 2, points, 2 * points}) {
    const GridSpace g(m, n);
    const MollerResult r = moller(g, s, c.direction);
    dyn.push_back(band_elements(g, t_operator_dynamic(g, s, r.omega), s.dim()));
    spec.push_back(band_elements(g, t_operator_spectral(g, s), s.dim()));
  }
  auto diff = [](const Table& x, const Table& y) {
    double d = 0;
    for (int a = 0; a < 2; ++a) {
      for (int b = 0; b < 2; ++b) d = std::max(d, (x[a][b] - y[a][b]).cwiseAbs().maxCoeff());
    }
    return d;
  };
  bool cauchy = true;
  std::string steps;
  for (std::size_t i = 2; i < dyn.size(); ++i) {
    const double dd = diff(dyn[i], dyn[i - 1]);
    const double ds = diff(spec[i], spec[i - 1]);
    cauchy = cauchy && dd < diff(dyn[i - 1], dyn[i - 2]);
    cauchy = cauchy && (ds < diff(spec[i - 1], spec[i - 2]) || ds < 1e-12);
    steps += " " + sci(dd);
  }
  CheckItem item = at_most("scattering", c.worst, 5e-2,
                           std::string("direction ") + (c.direction == Direction::plus ? "plus" : "minus") +
                               ", other " + sci(c.worst_other) + ", eta estimate " + sci(c.estimate) +
                               ", intertwining " + sci(c.intertwining) + ", Cauchy" + steps);
  item.passed = item.passed && cauchy;
  if (!cauchy) item.detail += "; refinement differences not decreasing";
  return item;
}

CheckItem check_normalization(const SpectralModel& m, const SystemModel& s, int per_band) {
  double worst = 0;
  for (int eps = 0; eps < 2; ++eps) {
    const Density& band = m.rho(eps);
    if (band.empty()) continue;
    for (int k = 0; k < per_band; ++k) {
      const double e = band.lo() + (k + 0.5) * (band.hi() - band.lo()) / per_band;
      worst = std::max(worst, fm_consistency(s, m, e));
    }
  }
  return at_most("normalization", worst, 1e-10);
}

std::vector<CheckItem> run_suite(const SpectralModel& m, const SystemModel& s, const SuiteOptions& opt) {
  if (opt.threads < 1) throw ValidationError("threads must be at least 1");
  std::vector<std::function<CheckItem()>> tasks{
      [&] { return check_algebra(opt.seed, opt.algebra_trials); },
      [&] { return check_fixed_points(opt.seed + 1, opt.random_trials); },
      [&] { return check_collision_identity(opt.seed + 2, opt.random_trials); },
      [&] { return check_damping_suite(m, s, opt.seed + 3); },
      [&] { return check_decay(m, s); },
      [&] { return check_prelimit(m); },
      [&] { return check_scattering(m, s, opt.scatter_points); },
      [&] { return check_normalization(m, s); },
  };
  const char* names[] = {"algebra", "fixed_points", "collision_identity", "damping",
                         "decay", "prelimit", "scattering", "normalization"};
  std::vector<CheckItem> out(tasks.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < tasks.size(); i = next++) {
      try {
        out[i] = tasks[i]();
      } catch (const std::exception& e) {
        out[i] = {names[i], NAN, 0, false, std::string("error: ") + e.what()};
      }
    }
  };
  std::vector<std::thread> pool;
  const int n = std::min<int>(opt.threads, static_cast<int>(tasks.size()));
  for (int i = 1; i < n; ++i) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return out;
}

}  // namespace ldl

#pragma once

#include <array>
#include <functional>
#include <vector>

#include "ldl/spectral.hpp"

namespace ldl {

/// exp(-((t - center) / width)^2)
struct TimeGaussian {
  double center = 0;
  double width = 1;
  double operator()(double t) const;
};

/// Real energy test function on a closed support.
struct EnergyFunction {
  std::function<double(double)> f;
  double lo = 0;
  double hi = 0;

  static EnergyFunction of(const Density& d);
  bool empty() const { return !(lo < hi); }
};

struct TestFunctionPair {
  TimeGaussian phi;
  TimeGaussian psi;
  EnergyFunction f;
  EnergyFunction g;
};

enum class KernelMode { full, simplex };

struct LimitPoint {
  double lambda = 0;
  cplx value;
  cplx limit;
  double abs_error = 0;
  /// abs_error / |limit|, or abs_error when the limit vanishes
  double error = 0;
  /// error did not decrease from the previous lambda
  bool flagged = false;
};

struct PrelimitOptions {
  /// relative tolerance on the node-rule comparison of the oscillatory quadrature
  double rel_tol = 1e-7;
  double abs_tol = 1e-10;
  /// Gaussian time tails are cut at this many widths
  double tail = 7.0;
};

/// int phi(t) psi(t + s) dt in closed form.
double overlap(const TimeGaussian& phi, const TimeGaussian& psi, double s);

/// I_lambda = int dt dt' phi(t) psi(t') f(E1) g(E2) e^{i (t'-t)(E1-E2)/lambda^2} / lambda^2 over
/// all times (full) or over t' < t (simplex), after the substitution u = (t'-t)/lambda^2.
cplx kernel_value(const TestFunctionPair& p, double lambda, KernelMode mode,
                  const PrelimitOptions& opt = {});
/// lambda -> 0: 2 pi int phi psi int f g (full), int phi psi int g(E) (pi f(E) - i PV ...) (simplex).
cplx kernel_limit(const TestFunctionPair& p, KernelMode mode, const Quadrature& q = {});

/// Sweep over decreasing lambdas. Throws ConvergenceError naming the smallest lambda reached
/// when the oscillatory quadrature fails.
std::vector<LimitPoint> kernel_limit_check(const TestFunctionPair& p, const std::vector<double>& lambdas,
                                           KernelMode mode, const PrelimitOptions& opt = {});

/// At most one flagged step.
bool sweep_converges(const std::vector<LimitPoint>& points);

/// Band labels and smearings of <B_{e1,e2}(f1,f2,phi) B+_{e3,e4}(f3,f4,psi)>.
struct TwoPointLabels {
  std::array<int, 4> eps{0, 1, 0, 1};
  std::array<EnergyFunction, 4> f;
  TimeGaussian phi;
  TimeGaussian psi;
};

/// Scalar part of the vacuum two-point function at lambda against the causal limit.
LimitPoint prelimit_two_point(const SpectralModel& m, double lambda, const TwoPointLabels& labels,
                              const PrelimitOptions& opt = {});

/// Gaussian bump on a band support: center at the midpoint shifted by `shift` support lengths,
/// width `width` support lengths.
EnergyFunction band_bump(const Density& band, double shift, double width);
/// Standard probes on a model: both slots on band 0 (full mode) or band 0 against band 1 (simplex).
TestFunctionPair standard_pair(const SpectralModel& m, KernelMode mode);
TwoPointLabels standard_two_point(const SpectralModel& m);

}  // namespace ldl

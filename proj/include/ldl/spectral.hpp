#pragma once

#include <complex>
#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace ldl {

using cplx = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;

/// Energy density of one band, zero outside its closed support [lo, hi].
class Density {
 public:
  /// amplitude * exp(-((E - center)/width)^2) on [lo, hi].
  static Density gaussian(double amplitude, double center, double width, double lo, double hi);
  /// Monotone cubic interpolation through (energy, value) samples; support is the sample range.
  static Density table(std::vector<double> energy, std::vector<double> value);
  static Density zero();

  double operator()(double e) const;
  double lo() const { return lo_; }
  double hi() const { return hi_; }
  bool empty() const { return kind_ == Kind::zero; }
  bool inside(double e) const { return e > lo_ && e < hi_; }

 private:
  enum class Kind { zero, gaussian, table };
  Kind kind_ = Kind::zero;
  double lo_ = 0, hi_ = 0;
  double amplitude_ = 0, center_ = 0, width_ = 1;
  std::function<double(double)> table_;
};

enum class ThermalH { h1, h1prime };

struct Quadrature {
  double rel_tol = 1e-8;
  double abs_tol = 1e-14;
  int max_depth = 30;
};

class SpectralModel {
 public:
  SpectralModel(Density rho0, Density rho1, double beta, double omega0,
                ThermalH thermal = ThermalH::h1, Quadrature quad = {});

  const Density& rho(int eps) const { return rho_[eps]; }
  double beta() const { return beta_; }
  double omega0() const { return omega0_; }
  ThermalH thermal() const { return thermal_; }
  const Quadrature& quad() const { return quad_; }

 private:
  Density rho_[2];
  double beta_;
  double omega0_;
  ThermalH thermal_;
  Quadrature quad_;
};

class SystemModel {
 public:
  explicit SystemModel(CMatrix d);
  /// D must be proportional to |e0><e1| in the basis where the system Hamiltonian is diagonal.
  SystemModel(CMatrix d, std::pair<int, int> levels);

  int dim() const { return static_cast<int>(d_.rows()); }
  /// D for eps = 0, D^dagger for eps = 1.
  const CMatrix& d(int eps) const { return eps == 0 ? d_ : d_adj_; }

 private:
  CMatrix d_;
  CMatrix d_adj_;
};

/// The canonical two-level desk model with Gaussian bands around 2 and 5.
SpectralModel model_m1();
SystemModel system_m1();

/// pi*rho(E) - i*PV int rho(E')/(E'-E) dE' for rho supported on [lo, hi].
cplx plemelj(const std::function<double(double)>& rho, double lo, double hi, double e,
             const Quadrature& q);
/// pi*rho(E) - i*PV int rho(E')/(E'-E) dE'.
cplx gamma_eps(const SpectralModel& m, int eps, double e);
double weight_w(const SpectralModel& m, int eps, double e);
double n_eps(const SpectralModel& m, int eps, double e);

/// (1 + gamma_eps gamma_{1-eps} D_eps D_{1-eps})^{-1}.
CMatrix t_eps_matrix(const SpectralModel& m, const SystemModel& s, int eps, double e);
/// Same, with the scalar product gamma_eps*gamma_{1-eps} supplied by the caller.
CMatrix t_eps_matrix(const SystemModel& s, int eps, cplx gg);

/// Integrand of the damping operator at energy E, summed over both bands.
CMatrix gamma_integrand(const SpectralModel& m, const SystemModel& s, double e);
CMatrix gamma_matrix(const SpectralModel& m, const SystemModel& s);

double check_damping(const CMatrix& g);

struct DecayPoint {
  double t;
  CMatrix u;
  double norm;
};
std::vector<DecayPoint> decay_curve(const CMatrix& g, const std::vector<double>& times);

/// Member of the family {g_eps, P_E g_eps} entering the thermal inner product.
struct FormVector {
  int eps;
  std::optional<double> energy;
};
/// (a (x) b | c (x) d) of the thermal tensor product.
cplx beta_inner(const SpectralModel& m, const FormVector& a, const FormVector& b,
                const FormVector& c, const FormVector& d);

/// Adaptive Gauss-Kronrod (7/15) integration of a matrix-valued function.
CMatrix integrate_matrix(const std::function<CMatrix(double)>& f, double a, double b,
                         const Quadrature& q);
/// Adaptive Gauss-Kronrod integration of a real function; throws on tolerance failure.
double integrate(const std::function<double(double)>& f, double a, double b, const Quadrature& q);

}  // namespace ldl

#include "ldl/scattering.hpp"

#include <cmath>
#include <string>

#include <Eigen/Eigenvalues>

#include "ldl/errors.hpp"

namespace ldl {

namespace {

const cplx kI{0.0, 1.0};

double spectral_norm(const CMatrix& m) {
  if (m.size() == 0) return 0.0;
  const Eigen::SelfAdjointEigenSolver<CMatrix> es(m.adjoint() * m, Eigen::EigenvaluesOnly);
  return std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff()));
}

// Applies sum_eps D_eps (x) |a_eps><b_eps| to the columns of u without forming the operator.
CMatrix apply_rank(const SystemModel& sys, int n, const std::array<Eigen::VectorXcd, 2>& a,
                   const std::array<Eigen::VectorXcd, 2>& b, const CMatrix& u) {
  const int ns = sys.dim();
  CMatrix out = CMatrix::Zero(u.rows(), u.cols());
  for (int eps = 0; eps < 2; ++eps) {
    CMatrix c(ns, u.cols());
    for (int j = 0; j < ns; ++j) c.row(j) = b[eps].adjoint() * u.middleRows(j * n, n);
    const CMatrix d = sys.d(eps) * c;
    for (int i = 0; i < ns; ++i) out.middleRows(i * n, n) += a[eps] * d.row(i);
  }
  return out;
}

CMatrix kron(const CMatrix& a, const CMatrix& b) {
  CMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (int i = 0; i < a.rows(); ++i) {
    for (int j = 0; j < a.cols(); ++j) out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  }
  return out;
}

}  // namespace

GridSpace::GridSpace(const SpectralModel& m, int points) : model_(m) {
  if (points < 2 || points % 2 != 0) throw ValidationError("grid needs an even number of points >= 2");
  for (int eps = 0; eps < 2; ++eps) {
    if (m.rho(eps).empty()) throw ValidationError("grid needs both bands to have support");
  }
  const int per_band = points / 2;
  for (int eps = 0; eps < 2; ++eps) {
    const Density& rho = m.rho(eps);
    const double h = (rho.hi() - rho.lo()) / per_band;
    for (int k = 0; k < per_band; ++k) {
      energy_.push_back(rho.lo() + (k + 0.5) * h);
      weight_.push_back(h);
      band_.push_back(eps);
    }
  }
  for (int eps = 0; eps < 2; ++eps) {
    g_[eps] = Eigen::VectorXd::Zero(size());
    for (int k = 0; k < size(); ++k) {
      if (band_[k] == eps) g_[eps](k) = std::sqrt(std::max(0.0, m.rho(eps)(energy_[k])) * weight_[k]);
    }
  }
}

Eigen::VectorXd GridSpace::h1() const {
  Eigen::VectorXd h = h1_prime();
  for (int k = 0; k < size(); ++k) {
    if (band_[k] == 0) h(k) += model_.omega0();
  }
  return h;
}

Eigen::VectorXd GridSpace::h1_prime() const {
  return Eigen::Map<const Eigen::VectorXd>(energy_.data(), size());
}

CMatrix v1_matrix(const GridSpace& grid, const SystemModel& sys) {
  CMatrix v = CMatrix::Zero(sys.dim() * grid.size(), sys.dim() * grid.size());
  for (int eps = 0; eps < 2; ++eps) {
    const Eigen::MatrixXd ket_bra = grid.g_vec(eps) * grid.g_vec(1 - eps).transpose();
    v += kron(sys.d(eps), ket_bra.cast<cplx>());
  }
  return v;
}

CMatrix evolve_one_particle(const GridSpace& grid, const SystemModel& sys, double t, double dt) {
  if (!(dt > 0) || !(t >= 0)) throw ValidationError("evolution needs t >= 0 and dt > 0");
  const int n = grid.size();
  const int dim = sys.dim() * n;
  const Eigen::VectorXd e = grid.h1_prime();
  auto rhs = [&](double s, const CMatrix& u) {
    std::array<Eigen::VectorXcd, 2> a, b;
    for (int eps = 0; eps < 2; ++eps) {
      a[eps] = Eigen::VectorXcd(n);
      b[eps] = Eigen::VectorXcd(n);
      for (int k = 0; k < n; ++k) {
        const cplx phase = std::polar(1.0, s * e(k));
        a[eps](k) = phase * grid.g_vec(eps)(k);
        b[eps](k) = phase * grid.g_vec(1 - eps)(k);
      }
    }
    return CMatrix(-kI * apply_rank(sys, n, a, b, u));
  };
  CMatrix u = CMatrix::Identity(dim, dim);
  const int steps = static_cast<int>(std::ceil(t / dt - 1e-12));
  const double h = steps > 0 ? t / steps : 0.0;
  for (int i = 0; i < steps; ++i) {
    const double s = i * h;
    const CMatrix k1 = rhs(s, u);
    const CMatrix k2 = rhs(s + h / 2, u + (h / 2) * k1);
    const CMatrix k3 = rhs(s + h / 2, u + (h / 2) * k2);
    const CMatrix k4 = rhs(s + h, u + h * k3);
    u += (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4);
  }
  const double defect = (u.adjoint() * u - CMatrix::Identity(dim, dim)).cwiseAbs().maxCoeff();
  if (defect > 1e-8 * std::max(t, 1.0)) {
    throw ToleranceError("unitarity defect " + std::to_string(defect) + " at t = " + std::to_string(t) +
                         "; step " + std::to_string(dt) + " is too coarse");
  }
  return u;
}

CMatrix abel_average(const GridSpace& grid, const SystemModel& sys, Direction dir, double eta, double tmax,
                     MollerForm form) {
  if (!(eta > 0) || !(tmax > 0)) throw ValidationError("Abel average needs eta > 0 and Tmax > 0");
  const int n = grid.size();
  const int dim = sys.dim() * n;
  const Eigen::VectorXd e = grid.h1_prime();
  Eigen::VectorXd h0(dim);
  for (int i = 0; i < dim; ++i) h0(i) = e(i % n);
  CMatrix h = v1_matrix(grid, sys);
  h.diagonal() += h0.cast<cplx>();
  const Eigen::SelfAdjointEigenSolver<CMatrix> es(h);
  const CMatrix& q = es.eigenvectors();
  const Eigen::VectorXd& lam = es.eigenvalues();
  const double sign = dir == Direction::plus ? 1.0 : -1.0;
  // eta int_0^Tmax e^{-eta t} e^{i sign w t} dt
  auto factor = [&](double w) {
    const cplx z(-eta, sign * w);
    return -eta * (1.0 - std::exp(z * tmax)) / z;
  };
  if (form == MollerForm::exponential) {
    CMatrix m = q.adjoint();
    for (int a = 0; a < dim; ++a) {
      for (int b = 0; b < dim; ++b) m(a, b) *= factor(lam(a) - h0(b));
    }
    return q * m;
  }
  CMatrix m = q;
  for (int a = 0; a < dim; ++a) {
    for (int b = 0; b < dim; ++b) m(a, b) *= factor(h0(a) - lam(b));
  }
  return m * q.adjoint();
}

MollerResult moller(const GridSpace& grid, const SystemModel& sys, Direction dir, const MollerOptions& opt) {
  MollerResult r;
  r.omega_eta = abel_average(grid, sys, dir, opt.eta, opt.horizon / opt.eta, opt.form);
  const double half = opt.eta / 2;
  r.omega_half = abel_average(grid, sys, dir, half, opt.horizon / half, opt.form);
  r.omega = 2 * r.omega_half - r.omega_eta;
  const CMatrix probe = form_factor_states(grid, sys.dim());
  r.estimate = ((r.omega_eta - r.omega_half) * probe).norm() / (r.omega_half * probe).norm();
  if (!(r.estimate <= opt.tolerance)) {
    throw ConvergenceError("Moller operator not converged: relative change " + std::to_string(r.estimate) +
                           " between eta = " + std::to_string(opt.eta) + " (norm " +
                           std::to_string(r.omega_eta.norm()) + ") and eta = " + std::to_string(half) +
                           " (norm " + std::to_string(r.omega_half.norm()) + ")");
  }
  return r;
}

CMatrix form_factor_states(const GridSpace& grid, int dim) {
  const int n = grid.size();
  CMatrix out = CMatrix::Zero(dim * n, 2 * dim);
  for (int u = 0; u < dim; ++u) {
    for (int b = 0; b < 2; ++b) out.block(u * n, 2 * u + b, n, 1) = grid.g_vec(b).cast<cplx>();
  }
  return out;
}

double intertwining_residual(const GridSpace& grid, const SystemModel& sys, const CMatrix& omega, MollerForm form,
                             const std::optional<CMatrix>& hs) {
  const int n = grid.size();
  const int dim = sys.dim() * n;
  if (omega.rows() != dim || omega.cols() != dim) throw ValidationError("operator does not match the grid");
  CMatrix h0 = CMatrix::Zero(dim, dim);
  if (hs) {
    if (hs->rows() != sys.dim() || hs->cols() != sys.dim()) throw ValidationError("system Hamiltonian size");
    h0 = kron(*hs, CMatrix::Identity(n, n));
    const Eigen::VectorXd h1 = grid.h1();
    for (int i = 0; i < dim; ++i) h0(i, i) += h1(i % n);
  } else {
    const Eigen::VectorXd h1 = grid.h1_prime();
    for (int i = 0; i < dim; ++i) h0(i, i) = h1(i % n);
  }
  const CMatrix h = h0 + v1_matrix(grid, sys);
  const CMatrix gap = form == MollerForm::exponential ? CMatrix(h * omega - omega * h0) : CMatrix(omega * h - h0 * omega);
  return spectral_norm(gap) / spectral_norm(omega);
}

CMatrix t_operator_dynamic(const GridSpace& grid, const SystemModel& sys, const CMatrix& omega) {
  return v1_matrix(grid, sys) * omega;
}

CMatrix t_operator_spectral(const GridSpace& grid, const SystemModel& sys) {
  const int n = grid.size();
  const int ns = sys.dim();
  CMatrix t = CMatrix::Zero(ns * n, ns * n);
  for (int k = 0; k < n; ++k) {
    const int b = grid.band_of(k);
    const Instantiation in = instantiate(grid.model(), grid.energy(k));
    for (int eps = 0; eps < 2; ++eps) {
      const CMatrix r = r_matrix(sys, in, eps, b) * grid.g_vec(b)(k);
      for (int i = 0; i < ns; ++i) {
        for (int j = 0; j < ns; ++j) t.block(i * n, j * n + k, n, 1) += r(i, j) * grid.g_vec(eps).cast<cplx>();
      }
    }
  }
  return t;
}

std::array<std::array<CMatrix, 2>, 2> band_elements(const GridSpace& grid, const CMatrix& x, int dim) {
  const int n = grid.size();
  if (x.rows() != dim * n || x.cols() != dim * n) throw ValidationError("operator does not match the grid");
  std::array<std::array<CMatrix, 2>, 2> out;
  for (int a = 0; a < 2; ++a) {
    for (int b = 0; b < 2; ++b) {
      out[a][b] = CMatrix(dim, dim);
      const Eigen::VectorXcd ga = grid.g_vec(a).cast<cplx>();
      const Eigen::VectorXcd gb = grid.g_vec(b).cast<cplx>();
      for (int i = 0; i < dim; ++i) {
        for (int j = 0; j < dim; ++j) out[a][b](i, j) = ga.dot(x.block(i * n, j * n, n, n) * gb);
      }
    }
  }
  return out;
}

CrossCheck cross_check(const GridSpace& grid, const SystemModel& sys, const MollerOptions& opt, double dominant) {
  const int ns = sys.dim();
  const auto spec = band_elements(grid, t_operator_spectral(grid, sys), ns);
  double top = 0;
  for (const auto& row : spec) {
    for (const auto& m : row) top = std::max(top, m.cwiseAbs().maxCoeff());
  }
  struct Candidate {
    MollerResult moller;
    std::vector<ElementRow> rows;
    double worst = 0;
  };
  auto run = [&](Direction dir) {
    Candidate c;
    c.moller = moller(grid, sys, dir, opt);
    const auto dyn = band_elements(grid, t_operator_dynamic(grid, sys, c.moller.omega), ns);
    for (int a = 0; a < 2; ++a) {
      for (int b = 0; b < 2; ++b) {
        for (int u = 0; u < ns; ++u) {
          for (int v = 0; v < ns; ++v) {
            ElementRow r{a, b, u, v, spec[a][b](u, v), -kI * dyn[a][b](u, v), 0, false};
            const double mag = std::abs(r.spectral);
            r.rel = mag > 0 ? std::abs(r.dynamic - r.spectral) / mag : std::abs(r.dynamic);
            r.dominant = top > 0 && mag >= dominant * top;
            if (r.dominant) c.worst = std::max(c.worst, r.rel);
            c.rows.push_back(r);
          }
        }
      }
    }
    return c;
  };
  Candidate plus = run(Direction::plus);
  Candidate minus = run(Direction::minus);
  const bool take_plus = plus.worst <= minus.worst;
  Candidate& best = take_plus ? plus : minus;
  CrossCheck out;
  out.direction = take_plus ? Direction::plus : Direction::minus;
  out.worst = best.worst;
  out.worst_other = take_plus ? minus.worst : plus.worst;
  out.estimate = best.moller.estimate;
  out.intertwining = intertwining_residual(grid, sys, best.moller.omega, opt.form);
  out.rows = std::move(best.rows);
  return out;
}

}  // namespace ldl

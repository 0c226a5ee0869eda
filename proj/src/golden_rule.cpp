#include "ldl/golden_rule.hpp"

#include <cmath>
#include <numbers>
#include <optional>

#include "ldl/errors.hpp"

namespace ldl {

using algebra::AtomKind;
using algebra::Evolution;
using algebra::Expr;
using algebra::Generator;
using algebra::ScalarAtom;
using algebra::SysSym;
using algebra::Term;

namespace {

constexpr double two_pi = 2.0 * std::numbers::pi;
const cplx I(0.0, 1.0);

const std::string kE = "E";
const std::string kT = "t";

CMatrix identity(const SystemModel& sys) { return CMatrix::Identity(sys.dim(), sys.dim()); }

double gap(const CMatrix& a, const CMatrix& b) { return (a - b).cwiseAbs().maxCoeff(); }

// Mismatch scaled by the size of the reference, floored at 1.
double rel_gap(const CMatrix& got, const CMatrix& ref) {
  return gap(got, ref) / std::max(1.0, ref.cwiseAbs().maxCoeff());
}

std::string gen_key(algebra::GenKind kind, int e1, int e2) {
  return algebra::serialize(Generator::make(kind, e1, e2, {kE}, kT));
}

std::string key_b(int x, int y) { return gen_key(algebra::GenKind::B, x, y); }
std::string key_bdag(int x, int y) { return gen_key(algebra::GenKind::Bdag, x, y); }
const std::string kU = "U(t)";

void add_to(WordTable& table, const std::string& key, const CMatrix& v) {
  auto it = table.find(key);
  if (it == table.end()) {
    table.emplace(key, v);
  } else {
    it->second += v;
  }
}

CMatrix lookup(const WordTable& table, const std::string& key, int n) {
  auto it = table.find(key);
  return it == table.end() ? CMatrix::Zero(n, n) : it->second;
}

}  // namespace

Instantiation instantiate(const SpectralModel& m, double e) {
  Instantiation in;
  for (int eps = 0; eps < 2; ++eps) {
    in.gamma[eps] = gamma_eps(m, eps, e);
    in.w[eps] = weight_w(m, eps, e);
  }
  return in;
}

CMatrix evaluate_coefficient(const Term& t, const SystemModel& sys, const Instantiation& in) {
  if (!t.bound_energy.empty() || !t.bound_time.empty()) {
    throw AlgebraError("cannot evaluate a term with open integrals: " + algebra::serialize(t));
  }
  cplx scalar = t.coeff.to_complex() * std::pow(two_pi, t.two_pi_power);
  for (const auto& a : t.scalars) {
    switch (a.kind) {
      case AtomKind::gamma:
        scalar *= a.conj ? std::conj(in.gamma[a.eps]) : in.gamma[a.eps];
        break;
      case AtomKind::w:
        scalar *= in.w[a.eps];
        break;
      case AtomKind::n_inv:
        if (in.w[a.eps] == 0.0) throw DomainError("n_eps is undefined where w_eps vanishes");
        scalar /= in.w[a.eps];
        break;
      case AtomKind::rho:
        scalar *= in.gamma[a.eps].real() / std::numbers::pi;
        break;
      default:
        throw AlgebraError("unresolved kernel in " + algebra::serialize(t));
    }
  }
  CMatrix out = identity(sys);
  const cplx gg = in.gamma[0] * in.gamma[1];
  for (const auto& s : t.sys) {
    if (s.kind == SysSym::Kind::D) {
      out = out * sys.d(s.eps);
    } else {
      const CMatrix tm = t_eps_matrix(sys, s.eps, gg);
      out = out * (s.dagger ? CMatrix(tm.adjoint()) : tm);
    }
  }
  return scalar * out;
}

std::string word_key(const std::vector<algebra::Factor>& word) {
  std::string key;
  for (const auto& f : word) {
    if (!key.empty()) key += ' ';
    if (const auto* g = std::get_if<Generator>(&f)) {
      key += algebra::serialize(*g);
    } else if (const auto* u = std::get_if<Evolution>(&f)) {
      key += (u->dagger ? "U+(" : "U(") + u->time + ")";
    } else {
      throw AlgebraError("unevaluated evolution commutator in a coefficient table");
    }
  }
  return key;
}

WordTable collect(const Expr& x, const SystemModel& sys, const Instantiation& in) {
  WordTable out;
  for (const auto& t : x.terms()) add_to(out, word_key(t.word), evaluate_coefficient(t, sys, in));
  return out;
}

// ------------------------------------------------------------ fixed point

namespace golden {

Expr evolution_step(int x, int y) {
  const Generator b = Generator::B(x, y, {kE}, kT);
  Expr acc;
  for (int e = 0; e < 2; ++e) {
    const Expr h = Expr::of(Generator::N(e, 1 - e, {"E1"}, "t1")) +
                   Expr::of(Generator::Bdag(e, 1 - e, {"E1"}, "t1"));
    const Expr c = algebra::normal_order(algebra::commutator(Expr::of(b), h), algebra::Mode::causal);
    acc += QComplex{Rational(0), Rational(-1)} * Expr::of(SysSym::D(e)) * c * Expr::evolution("t1");
  }
  acc = acc.integrate_energy({"E1"}).integrate_time({"t1"});
  return algebra::canonicalize(algebra::contract_deltas(algebra::canonicalize(acc), {"E1", "t1"}));
}

FixedPoint solve_fixed_point(const SystemModel& sys, const Instantiation& in, int y) {
  const int n = sys.dim();
  FixedPoint fp;
  fp.y = y;
  for (int x = 0; x < 2; ++x) {
    for (auto& c : fp.a[x]) c = CMatrix::Zero(n, n);
    for (auto& c : fp.m[x]) c = CMatrix::Zero(n, n);
    for (const auto& [key, v] : collect(evolution_step(x, y), sys, in)) {
      if (key == kU) {
        fp.a[x][0] += v;
        continue;
      }
      bool known = false;
      for (int xp = 0; xp < 2; ++xp) {
        if (key == key_b(xp, y) + " " + kU) {
          // B U = [B, U] + U B
          fp.m[x][xp] += v;
          fp.a[x][1 + xp] += v;
          known = true;
        }
      }
      if (!known) throw AlgebraError("unexpected word in the evolution step: " + key);
    }
  }
  CMatrix big = CMatrix::Identity(2 * n, 2 * n);
  for (int x = 0; x < 2; ++x) {
    for (int xp = 0; xp < 2; ++xp) big.block(x * n, xp * n, n, n) -= fp.m[x][xp];
  }
  Eigen::PartialPivLU<CMatrix> lu(big);
  if (!(lu.rcond() > 1e-13)) throw SingularCoefficientError("fixed-point system is singular");
  for (int b = 0; b < 3; ++b) {
    CMatrix rhs(2 * n, n);
    rhs << fp.a[0][b], fp.a[1][b];
    const CMatrix sol = lu.solve(rhs);
    fp.solution[0][b] = sol.topRows(n);
    fp.solution[1][b] = sol.bottomRows(n);
  }
  return fp;
}

}  // namespace golden

// ------------------------------------------------------- normal ordering

namespace {

using FixedPoints = std::array<std::optional<golden::FixedPoint>, 2>;

// n_eps' B+_{.,eps'}(E) ... B_{.,eps'}(E) where w_eps'(E) = 0: both fields have zero norm there.
bool null_channel(const Term& t, const Instantiation& in) {
  for (const auto& a : t.scalars) {
    if (a.kind == AtomKind::n_inv && in.w[a.eps] == 0.0) return true;
  }
  return false;
}

/// Moves the annihilator standing directly left of U(t) to the right using the fixed points.
WordTable normal_ordered_table(const Expr& x, const SystemModel& sys, const Instantiation& in) {
  FixedPoints fps;
  WordTable out;
  for (const auto& t : x.terms()) {
    if (null_channel(t, in)) continue;
    const CMatrix c = evaluate_coefficient(t, sys, in);
    const auto& word = t.word;
    if (word.empty() || word_key({word.back()}) != kU) {
      throw AlgebraError("expected a word ending in U(t): " + algebra::serialize(t));
    }
    const auto* g = word.size() >= 2 ? std::get_if<Generator>(&word[word.size() - 2]) : nullptr;
    if (!g || g->kind() != algebra::GenKind::B) {
      add_to(out, word_key(word), c);
      continue;
    }
    if (word_key({word[word.size() - 2]}) != key_b(g->eps1(), g->eps2())) {
      throw AlgebraError("annihilator not at (E, t): " + algebra::serialize(t));
    }
    const int xg = g->eps1();
    const int y = g->eps2();
    if (!fps[y]) fps[y] = golden::solve_fixed_point(sys, in, y);
    const auto& sol = fps[y]->solution[xg];
    std::vector<algebra::Factor> prefix(word.begin(), word.end() - 2);
    std::string head = word_key(prefix);
    if (!head.empty()) head += ' ';
    add_to(out, head + kU, c * sol[0]);
    for (int xp = 0; xp < 2; ++xp) {
      add_to(out, head + kU + " " + key_b(xp, y), c * sol[1 + xp]);
    }
    add_to(out, head + kU + " " + key_b(xg, y), c);
  }
  return out;
}

// Words carrying a field of a channel with w_eps'(E) = 0.
bool closed_channel(const std::string& key, const Instantiation& in) {
  for (int y = 0; y < 2; ++y) {
    if (in.w[y] != 0.0) continue;
    for (int a = 0; a < 2; ++a) {
      if (key.find(key_b(a, y)) != std::string::npos) return true;
      if (key.find(key_bdag(a, y)) != std::string::npos) return true;
    }
  }
  return false;
}

Expr minus_i_d(int eps) { return QComplex{Rational(0), Rational(-1)} * Expr::of(SysSym::D(eps)); }

Expr generator_at_e(algebra::GenKind kind, int e1, int e2) {
  return Expr::of(Generator::make(kind, e1, e2, {kE}, kT));
}

}  // namespace

namespace golden {

NormalOrder assemble_normal_order(const SystemModel& sys, const Instantiation& in) {
  using algebra::GenKind;
  const int n = sys.dim();
  Expr rhs;
  for (int e = 0; e < 2; ++e) {
    const Expr h = generator_at_e(GenKind::N, e, 1 - e) + generator_at_e(GenKind::B, 1 - e, e) +
                   generator_at_e(GenKind::Bdag, e, 1 - e);
    rhs += minus_i_d(e) * h * Expr::evolution(kT);
  }
  WordTable table = normal_ordered_table(algebra::canonicalize(algebra::expand_number(rhs)), sys, in);

  NormalOrder out;
  auto take = [&](const std::string& key) {
    CMatrix v = lookup(table, key, n);
    table.erase(key);
    return v;
  };
  out.drift = take(kU);
  for (int a = 0; a < 2; ++a) {
    for (int b = 0; b < 2; ++b) {
      out.creation[a][b] = take(key_bdag(a, b) + " " + kU);
      out.annihilation[a][b] = take(kU + " " + key_b(a, b));
    }
  }
  for (int e = 0; e < 2; ++e) {
    for (int xb = 0; xb < 2; ++xb) {
      std::vector<CMatrix> per;
      for (int ep = 0; ep < 2; ++ep) {
        const CMatrix v = take(key_bdag(e, ep) + " " + kU + " " + key_b(xb, ep));
        if (in.w[ep] != 0.0) per.push_back(in.w[ep] * v);
      }
      if (per.empty()) throw DomainError("no open channel at this energy");
      out.number[e][xb] = per.front();
      out.channel_spread = std::max(out.channel_spread, gap(per.front(), per.back()));
    }
  }
  for (const auto& [key, v] : table) {
    if (v.cwiseAbs().maxCoeff() > 0) throw AlgebraError("unexpected word in the normal order: " + key);
  }
  return out;
}

}  // namespace golden

// ----------------------------------------------------------- closed forms

CMatrix r_matrix(const SystemModel& sys, const Instantiation& in, int eps, int eps2) {
  const CMatrix t = t_eps_matrix(sys, eps, in.gamma[0] * in.gamma[1]);
  if (eps == eps2) return -in.gamma[1 - eps] * sys.d(eps) * sys.d(1 - eps) * t;
  return -I * t * sys.d(eps);
}

double verify_te_identity(const SystemModel& sys, cplx g0, cplx g1) {
  const cplx gg = g0 * g1;
  double worst = 0;
  for (int eps = 0; eps < 2; ++eps) {
    const CMatrix t = t_eps_matrix(sys, eps, gg);
    const CMatrix& d = sys.d(eps);
    const CMatrix lhs = I * d * (identity(sys) - sys.d(1 - eps) * gg * t * d);
    worst = std::max(worst, gap(lhs, I * t * d));
  }
  return worst;
}

double verify_theorem2(const SystemModel& sys, const Instantiation& in) {
  double worst = 0;
  const cplx gg = in.gamma[0] * in.gamma[1];
  for (int eps = 0; eps < 2; ++eps) {
    const golden::FixedPoint fp = golden::solve_fixed_point(sys, in, eps);
    const CMatrix& d = sys.d(eps);
    const CMatrix dd = d * sys.d(1 - eps);
    const CMatrix t = t_eps_matrix(sys, eps, gg);
    // basis {U, U B_{0,eps}, U B_{1,eps}}
    std::array<CMatrix, 3> bracket;
    bracket[0] = in.w[eps] * identity(sys);
    bracket[1 + (1 - eps)] = -I * in.gamma[eps] * d;
    bracket[1 + eps] = identity(sys);
    const CMatrix pivot = identity(sys) + gg * dd;
    for (int b = 0; b < 3; ++b) {
      const CMatrix solved = -I * d * fp.solution[1 - eps][b];
      const CMatrix claimed = -in.gamma[1 - eps] * dd * t * bracket[b];
      const CMatrix rhs = -in.gamma[1 - eps] * dd * bracket[b];
      worst = std::max({worst, rel_gap(solved, claimed), rel_gap(pivot * claimed, rhs)});
    }
  }
  return worst;
}

double verify_theorem3(const SystemModel& sys, const Instantiation& in) {
  using algebra::GenKind;
  const int n = sys.dim();
  const cplx gg = in.gamma[0] * in.gamma[1];
  double worst = 0;
  for (int eps = 0; eps < 2; ++eps) {
    const Expr lhs = minus_i_d(eps) * generator_at_e(GenKind::N, eps, 1 - eps) * Expr::evolution(kT);
    WordTable table = normal_ordered_table(algebra::canonicalize(algebra::expand_number(lhs)), sys, in);

    const CMatrix& d = sys.d(eps);
    const CMatrix k = -in.gamma[1 - eps] * d * sys.d(1 - eps) * t_eps_matrix(sys, eps, gg);
    const CMatrix td = t_eps_matrix(sys, eps, gg) * d;
    WordTable claimed;
    claimed[key_bdag(eps, 1 - eps) + " " + kU] = k * (-I * in.gamma[eps] * d);
    claimed[key_bdag(eps, eps) + " " + kU] = k;
    for (int ep = 0; ep < 2; ++ep) {
      if (in.w[ep] == 0.0) continue;
      const double n_ep = 1.0 / in.w[ep];
      claimed[key_bdag(eps, ep) + " " + kU + " " + key_b(1 - eps, ep)] = -n_ep * I * td;
      claimed[key_bdag(eps, ep) + " " + kU + " " + key_b(eps, ep)] = n_ep * k;
    }
    for (auto it = claimed.begin(); it != claimed.end();) {
      it = closed_channel(it->first, in) ? claimed.erase(it) : std::next(it);
    }
    for (const auto& [key, v] : claimed) worst = std::max(worst, rel_gap(lookup(table, key, n), v));
    for (const auto& [key, v] : table) {
      if (!claimed.count(key) && !closed_channel(key, in)) {
        worst = std::max(worst, v.cwiseAbs().maxCoeff());
      }
    }
  }
  return worst;
}

// -------------------------------------------------------------- QSDE form

namespace {

Expr symbolic_r(int eps, int eps2) {
  if (eps == eps2) {
    return QComplex{Rational(-1), Rational(0)} * Expr::of(ScalarAtom::gamma(1 - eps, kE)) *
           Expr::of(SysSym::D(eps)) * Expr::of(SysSym::D(1 - eps)) * Expr::of(SysSym::T(eps, kE));
  }
  return QComplex{Rational(0), Rational(-1)} * Expr::of(SysSym::T(eps, kE)) * Expr::of(SysSym::D(eps));
}

}  // namespace

Expr normal_ordered_integrand() {
  using algebra::GenKind;
  const Expr u = Expr::evolution(kT);
  Expr out;
  for (int eps = 0; eps < 2; ++eps) {
    for (int x : {1 - eps, eps}) {
      const Expr r = symbolic_r(eps, x);
      for (int ep = 0; ep < 2; ++ep) {
        out += r * Expr::of(ScalarAtom::n_inv(ep, kE)) * generator_at_e(GenKind::Bdag, eps, ep) * u *
               generator_at_e(GenKind::B, x, ep);
      }
      out += r * generator_at_e(GenKind::Bdag, eps, x) * u;
      out += r * u * generator_at_e(GenKind::B, x, eps);
    }
    out += symbolic_r(eps, eps) * Expr::of(ScalarAtom::w(eps, kE)) * u;
  }
  return algebra::canonicalize(out);
}

QsdeCoefficients derive_qsde(const SystemModel& sys, const SpectralModel& model) {
  QsdeCoefficients q;
  q.r = [sys, model](int eps, int eps2, double e) {
    return r_matrix(sys, instantiate(model, e), eps, eps2);
  };
  q.drift_integrand = [sys, model](double e) {
    const Instantiation in = instantiate(model, e);
    CMatrix out = CMatrix::Zero(sys.dim(), sys.dim());
    for (int eps = 0; eps < 2; ++eps) {
      if (in.w[eps] != 0.0) out -= r_matrix(sys, in, eps, eps) * in.w[eps];
    }
    return out;
  };
  q.drift = [sys, model]() { return gamma_matrix(model, sys); };
  q.fm_operator = [sys, model](double e) {
    const Instantiation in = instantiate(model, e);
    std::array<std::array<CMatrix, 2>, 2> t3;
    for (int a = 0; a < 2; ++a) {
      for (int b = 0; b < 2; ++b) t3[a][b] = two_pi * r_matrix(sys, in, a, b);
    }
    return t3;
  };
  q.fm_vector = [model](double e) {
    std::array<double, 2> xi{};
    bool any = false;
    for (int eps = 0; eps < 2; ++eps) {
      const double rho = model.rho(eps)(e);
      if (rho > 0) {
        xi[eps] = 1.0 / (two_pi * rho);
        any = true;
      }
    }
    if (!any) throw DomainError("xi(E) is undefined where both densities vanish");
    return xi;
  };
  q.integrand = normal_ordered_integrand();
  return q;
}

double fm_consistency(const SystemModel& sys, const SpectralModel& model, double e) {
  const QsdeCoefficients q = derive_qsde(sys, model);
  const std::array<double, 2> xi = q.fm_vector(e);
  const auto t3 = q.fm_operator(e);
  const Instantiation in = instantiate(model, e);
  CMatrix lhs = CMatrix::Zero(sys.dim(), sys.dim());
  // <xi, T3 xi>: the block (eps, eps') maps g_b (x) g_b to
  // <g_eps', P_E g_b> g_eps (x) P_E g_b
  for (int a = 0; a < 2; ++a) {
    if (xi[a] == 0) continue;
    for (int b = 0; b < 2; ++b) {
      if (xi[b] == 0) continue;
      const double rho_b = model.rho(b)(e);
      for (int eps = 0; eps < 2; ++eps) {
        const cplx inner = beta_inner(model, {a, {}}, {a, {}}, {eps, {}}, {b, e});
        if (inner == cplx(0)) continue;
        lhs += xi[a] * xi[b] * rho_b * inner * t3[eps][b];
      }
    }
  }
  CMatrix rhs = CMatrix::Zero(sys.dim(), sys.dim());
  for (int eps = 0; eps < 2; ++eps) {
    if (in.w[eps] != 0.0) rhs += r_matrix(sys, in, eps, eps) * in.w[eps];
  }
  return (lhs - rhs).cwiseAbs().maxCoeff();
}

}  // namespace ldl

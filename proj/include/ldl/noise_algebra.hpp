#pragma once

// Symbolic algebra of the low-density-limit master fields B, B+, N.
//
// An Expr is a finite sum of Terms. A Term is
//
//   coeff * (2pi)^k * [system word] * {scalar atoms} * <noise word>
//
// with bound (integrated) energy and time variables. System symbols (D_eps,
// T_eps(E)) commute with noise and scalars; scalar atoms commute with
// everything; the noise word is ordered and may contain the opaque
// evolution operator U(t).
//
// Time variables are ordered chronologically by name (see `chrono_later`).
// The causal limit of the pre-limit kernel exp(i(tb-ta)(Ea-Eb)/l^2)/l^2 is
// rendered as dplus(later, earlier) * causal(..) on that fixed order, which
// keeps the atom set closed under adjoint.

#include <compare>
#include <string>
#include <variant>
#include <vector>

#include "ldl/rational.hpp"

namespace ldl::algebra {

enum class Mode { causal, symmetric };

enum class GenKind { B, Bdag, N };

/// A master-field generator B_{e1,e2}, B+_{e1,e2} or N_{e1,e2}, either
/// doubly indexed (E1,E2,t) or integrated over one energy slot (E,t):
///   B(E,t)  = int dX B(X,E,t),   B+(E,t) = int dX B+(X,E,t),
///   N(E,t)  = int dX N(E,X,t).
class Generator {
 public:
  static Generator B(int e1, int e2, std::vector<std::string> energy, std::string time);
  static Generator Bdag(int e1, int e2, std::vector<std::string> energy, std::string time);
  static Generator N(int e1, int e2, std::vector<std::string> energy, std::string time);
  static Generator make(GenKind kind, int e1, int e2, std::vector<std::string> energy,
                        std::string time);

  GenKind kind() const { return kind_; }
  int eps1() const { return eps1_; }
  int eps2() const { return eps2_; }
  const std::vector<std::string>& energy() const { return energy_; }
  const std::string& time() const { return time_; }
  bool integrated() const { return energy_.size() == 1; }

  /// Rename variables (simultaneous substitution).
  template <class F>
  Generator renamed(F&& rename) const {
    std::vector<std::string> e;
    e.reserve(energy_.size());
    for (const auto& v : energy_) e.push_back(rename(v));
    return Generator(kind_, eps1_, eps2_, std::move(e), rename(time_));
  }

  friend auto operator<=>(const Generator&, const Generator&) = default;
  friend bool operator==(const Generator&, const Generator&) = default;

 private:
  Generator(GenKind kind, int e1, int e2, std::vector<std::string> energy, std::string time);

  GenKind kind_;
  int eps1_;
  int eps2_;
  std::vector<std::string> energy_;
  std::string time_;
};

enum class AtomKind {
  delta,        // delta(a - b)
  two_pi_delta, // 2 pi delta(a - b), symmetric counterpart of causal
  causal,       // 1 / (i (a - b - i0))
  dplus,        // delta_+(b - a): a is the later time
  dirac,        // delta(b - a)
  rho,          // <g_eps, P_a g_eps>
  w,            // <g_eps, P_a L^2 g_eps>
  gamma,        // gamma_eps(a), conj flag for its complex conjugate
  n_inv,        // n_eps(a) = 1 / w_eps(a)
};

struct ScalarAtom {
  AtomKind kind;
  int eps = -1;
  bool conj = false;
  std::string a;
  std::string b;

  static ScalarAtom delta(std::string x, std::string y) { return {AtomKind::delta, -1, false, std::move(x), std::move(y)}; }
  static ScalarAtom two_pi_delta(std::string x, std::string y) { return {AtomKind::two_pi_delta, -1, false, std::move(x), std::move(y)}; }
  static ScalarAtom causal(std::string x, std::string y) { return {AtomKind::causal, -1, false, std::move(x), std::move(y)}; }
  static ScalarAtom dplus(std::string later, std::string earlier) { return {AtomKind::dplus, -1, false, std::move(later), std::move(earlier)}; }
  static ScalarAtom dirac(std::string x, std::string y) { return {AtomKind::dirac, -1, false, std::move(x), std::move(y)}; }
  static ScalarAtom rho(int e, std::string x) { return {AtomKind::rho, e, false, std::move(x), {}}; }
  static ScalarAtom w(int e, std::string x) { return {AtomKind::w, e, false, std::move(x), {}}; }
  static ScalarAtom gamma(int e, std::string x, bool conj = false) { return {AtomKind::gamma, e, conj, std::move(x), {}}; }
  static ScalarAtom n_inv(int e, std::string x) { return {AtomKind::n_inv, e, false, std::move(x), {}}; }

  bool binary() const;
  bool is_time() const { return kind == AtomKind::dplus || kind == AtomKind::dirac; }
  bool is_energy_delta() const { return kind == AtomKind::delta || kind == AtomKind::two_pi_delta; }

  friend auto operator<=>(const ScalarAtom&, const ScalarAtom&) = default;
  friend bool operator==(const ScalarAtom&, const ScalarAtom&) = default;
};

/// System-space symbol: D_eps, or T_eps(E) (optionally daggered).
struct SysSym {
  enum class Kind { D, T } kind = Kind::D;
  int eps = 0;
  bool dagger = false;
  std::string energy;

  static SysSym D(int e) { return {Kind::D, e, false, {}}; }
  static SysSym T(int e, std::string energy) { return {Kind::T, e, false, std::move(energy)}; }

  friend auto operator<=>(const SysSym&, const SysSym&) = default;
  friend bool operator==(const SysSym&, const SysSym&) = default;
};

/// The opaque evolution operator U(t) or its adjoint.
struct Evolution {
  std::string time;
  bool dagger = false;
  friend auto operator<=>(const Evolution&, const Evolution&) = default;
  friend bool operator==(const Evolution&, const Evolution&) = default;
};

/// The unevaluated commutator [B(E,t), U(t)] (dagger: its adjoint).
struct EvolutionCommutator {
  Generator gen;
  std::string time;
  bool dagger = false;
  friend auto operator<=>(const EvolutionCommutator&, const EvolutionCommutator&) = default;
  friend bool operator==(const EvolutionCommutator&, const EvolutionCommutator&) = default;
};

using Factor = std::variant<Generator, Evolution, EvolutionCommutator>;

struct Term {
  QComplex coeff = QComplex::one();
  int two_pi_power = 0;
  std::vector<SysSym> sys;
  std::vector<ScalarAtom> scalars;
  std::vector<Factor> word;
  std::vector<std::string> bound_energy;
  std::vector<std::string> bound_time;

  bool has_generator() const;
  bool operator==(const Term&) const = default;
};

class Expr {
 public:
  Expr() = default;
  explicit Expr(Term t) { terms_.push_back(std::move(t)); }
  explicit Expr(std::vector<Term> ts) : terms_(std::move(ts)) {}

  static Expr zero() { return Expr(); }
  static Expr one() { return Expr(Term{}); }
  static Expr scalar(QComplex c) {
    Term t;
    t.coeff = c;
    return Expr(std::move(t));
  }
  static Expr of(const Generator& g);
  static Expr of(const ScalarAtom& a);
  static Expr of(const SysSym& s);
  static Expr evolution(std::string time);

  const std::vector<Term>& terms() const { return terms_; }
  bool empty() const { return terms_.empty(); }
  std::size_t size() const { return terms_.size(); }

  friend Expr operator+(const Expr& a, const Expr& b);
  friend Expr operator-(const Expr& a, const Expr& b);
  friend Expr operator*(const Expr& a, const Expr& b);
  friend Expr operator*(const QComplex& c, const Expr& e);
  Expr operator-() const;
  Expr& operator+=(const Expr& other);

  /// Mark variables as integrated over in every term.
  Expr integrate_energy(const std::vector<std::string>& vars) const;
  Expr integrate_time(const std::vector<std::string>& vars) const;

 private:
  std::vector<Term> terms_;
};

/// Strict chronological order on time-variable names: `a` is later than `b`.
/// Names are (letters)(digits and/or primes); a larger letter prefix is later,
/// and within one prefix more decoration means earlier: t > t' > t'' and
/// t > t1 > t2.
bool chrono_later(const std::string& a, const std::string& b);

/// A time name strictly earlier than `t` (used for Dyson-integral variables).
std::string earlier_time_name(const std::string& t);

/// Closed commutation table of the master fields.
Expr commutator(const Generator& a, const Generator& b, Mode mode);

/// General commutator ab - ba of expressions (no reordering applied).
Expr commutator(const Expr& a, const Expr& b);

Expr adjoint(const Expr& x);

/// Bring every noise word to the order B+ < N < B. U(t) is a barrier that
/// an annihilator B(.., s) passes only when s is chronologically later.
Expr normal_order(const Expr& x, Mode mode);

/// <vac| x |vac> with x normal-ordered; terms whose word still has generators
/// that cannot be removed by the vacuum stay (they contain U).
Expr vacuum_expectation(const Expr& x, Mode mode);

/// Replace every N by its representation through B+ B.
Expr expand_number(const Expr& x);

/// Integrate out the listed bound variables against energy deltas (sifting)
/// and against dplus/dirac for time variables (endpoint weight 1).
Expr contract_deltas(const Expr& x, const std::vector<std::string>& bound_vars);

/// Fold bound energy integrals back into gamma_eps and into integrated
/// generators where the pattern allows.
Expr fold_integrals(const Expr& x);

/// Canonical form: energy-delta classes substituted, n*w cancelled, scalars
/// sorted, commuting runs sorted, bound energies renamed, like terms merged.
Expr canonicalize(const Expr& x);

bool equivalent(const Expr& a, const Expr& b);

/// dplus -> dirac, causal -> two_pi_delta.
Expr to_symmetric(const Expr& x);

/// Canonical text form (one term per line, "0" for the empty sum).
std::string serialize(const Expr& x);
std::string serialize(const Term& t);
std::string serialize(const Generator& g);
Expr parse_expr(const std::string& text);

}  // namespace ldl::algebra

#include "ldl/noise_algebra.hpp"

#include <algorithm>
#include <cctype>
#include <tuple>

#include "algebra_detail.hpp"
#include "ldl/errors.hpp"

namespace ldl::algebra {

namespace {

bool valid_name(const std::string& v) {
  if (v.empty()) return false;
  return std::all_of(v.begin(), v.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '\'';
  });
}

void check_label(int e) {
  if (e != 0 && e != 1) throw ValidationError("generator label must be 0 or 1");
}

}  // namespace

Generator::Generator(GenKind kind, int e1, int e2, std::vector<std::string> energy,
                     std::string time)
    : kind_(kind), eps1_(e1), eps2_(e2), energy_(std::move(energy)), time_(std::move(time)) {
  check_label(e1);
  check_label(e2);
  if (energy_.empty() || energy_.size() > 2) {
    throw ValidationError("generator takes one or two energy variables");
  }
  for (const auto& v : energy_) {
    if (!valid_name(v)) throw ValidationError("invalid energy variable name '" + v + "'");
  }
  if (!valid_name(time_)) throw ValidationError("invalid time variable name '" + time_ + "'");
}

Generator Generator::make(GenKind kind, int e1, int e2, std::vector<std::string> energy,
                          std::string time) {
  return Generator(kind, e1, e2, std::move(energy), std::move(time));
}
Generator Generator::B(int e1, int e2, std::vector<std::string> energy, std::string time) {
  return make(GenKind::B, e1, e2, std::move(energy), std::move(time));
}
Generator Generator::Bdag(int e1, int e2, std::vector<std::string> energy, std::string time) {
  return make(GenKind::Bdag, e1, e2, std::move(energy), std::move(time));
}
Generator Generator::N(int e1, int e2, std::vector<std::string> energy, std::string time) {
  return make(GenKind::N, e1, e2, std::move(energy), std::move(time));
}

bool ScalarAtom::binary() const {
  switch (kind) {
    case AtomKind::delta:
    case AtomKind::two_pi_delta:
    case AtomKind::causal:
    case AtomKind::dplus:
    case AtomKind::dirac:
      return true;
    default:
      return false;
  }
}

bool Term::has_generator() const {
  return std::any_of(word.begin(), word.end(),
                     [](const Factor& f) { return std::holds_alternative<Generator>(f); });
}

// ---------------------------------------------------------------- Expr

Expr Expr::of(const Generator& g) {
  Term t;
  t.word.push_back(g);
  return Expr(std::move(t));
}

Expr Expr::of(const ScalarAtom& a) {
  Term t;
  t.scalars.push_back(a);
  return Expr(std::move(t));
}

Expr Expr::of(const SysSym& s) {
  Term t;
  t.sys.push_back(s);
  return Expr(std::move(t));
}

Expr Expr::evolution(std::string time) {
  Term t;
  t.word.push_back(Evolution{std::move(time), false});
  return Expr(std::move(t));
}

Expr operator+(const Expr& a, const Expr& b) {
  Expr out = a;
  out += b;
  return out;
}

Expr& Expr::operator+=(const Expr& other) {
  terms_.insert(terms_.end(), other.terms_.begin(), other.terms_.end());
  return *this;
}

Expr Expr::operator-() const {
  Expr out = *this;
  for (auto& t : out.terms_) t.coeff = -t.coeff;
  return out;
}

Expr operator-(const Expr& a, const Expr& b) { return a + (-b); }

Expr operator*(const Expr& a, const Expr& b) {
  std::vector<Term> out;
  out.reserve(a.terms_.size() * b.terms_.size());
  for (const auto& x : a.terms_) {
    for (const auto& y : b.terms_) out.push_back(detail::multiply(x, y));
  }
  return Expr(std::move(out));
}

Expr operator*(const QComplex& c, const Expr& e) {
  Expr out = e;
  for (auto& t : out.terms_) t.coeff = c * t.coeff;
  return out;
}

Expr Expr::integrate_energy(const std::vector<std::string>& vars) const {
  Expr out = *this;
  for (auto& t : out.terms_) {
    for (const auto& v : vars) {
      if (std::find(t.bound_energy.begin(), t.bound_energy.end(), v) == t.bound_energy.end()) {
        t.bound_energy.push_back(v);
      }
    }
  }
  return out;
}

Expr Expr::integrate_time(const std::vector<std::string>& vars) const {
  Expr out = *this;
  for (auto& t : out.terms_) {
    for (const auto& v : vars) {
      if (std::find(t.bound_time.begin(), t.bound_time.end(), v) == t.bound_time.end()) {
        t.bound_time.push_back(v);
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------- time order

namespace {

struct TimeKey {
  std::string base;
  long rank = 0;
};

TimeKey time_key(const std::string& name) {
  TimeKey k;
  std::size_t i = 0;
  while (i < name.size() && (std::isalpha(static_cast<unsigned char>(name[i])) || name[i] == '_')) {
    k.base += name[i++];
  }
  long digits = 0;
  bool have_digits = false;
  for (; i < name.size(); ++i) {
    if (name[i] == '\'') {
      ++k.rank;
    } else if (std::isdigit(static_cast<unsigned char>(name[i]))) {
      digits = digits * 10 + (name[i] - '0');
      have_digits = true;
    }
  }
  if (have_digits) k.rank += digits;
  return k;
}

}  // namespace

bool chrono_later(const std::string& a, const std::string& b) {
  if (a == b) return false;
  const TimeKey ka = time_key(a);
  const TimeKey kb = time_key(b);
  if (ka.base != kb.base) return ka.base > kb.base;
  if (ka.rank != kb.rank) return ka.rank < kb.rank;
  return a < b;
}

std::string earlier_time_name(const std::string& t) {
  const TimeKey k = time_key(t);
  return k.base + std::to_string(k.rank + 1);
}

// ---------------------------------------------------------------- detail

namespace detail {

namespace {

void add_vars(std::set<std::string>& out, const Generator& g) {
  for (const auto& v : g.energy()) out.insert(v);
  out.insert(g.time());
}

std::string renamed_var(const Renaming& r, const std::string& v) {
  auto it = r.find(v);
  return it == r.end() ? v : it->second;
}

}  // namespace

std::set<std::string> variables(const Generator& g) {
  std::set<std::string> out;
  add_vars(out, g);
  return out;
}

std::set<std::string> variables(const Term& t) {
  std::set<std::string> out;
  for (const auto& s : t.sys) {
    if (s.kind == SysSym::Kind::T) out.insert(s.energy);
  }
  for (const auto& a : t.scalars) {
    out.insert(a.a);
    if (a.binary()) out.insert(a.b);
  }
  for (const auto& f : t.word) {
    if (const auto* g = std::get_if<Generator>(&f)) add_vars(out, *g);
    if (const auto* u = std::get_if<Evolution>(&f)) out.insert(u->time);
    if (const auto* c = std::get_if<EvolutionCommutator>(&f)) {
      add_vars(out, c->gen);
      out.insert(c->time);
    }
  }
  out.insert(t.bound_energy.begin(), t.bound_energy.end());
  out.insert(t.bound_time.begin(), t.bound_time.end());
  return out;
}

Generator rename(const Generator& g, const Renaming& r) {
  return g.renamed([&](const std::string& v) { return renamed_var(r, v); });
}

void rename(Term& t, const Renaming& r) {
  if (r.empty()) return;
  for (auto& s : t.sys) {
    if (s.kind == SysSym::Kind::T) s.energy = renamed_var(r, s.energy);
  }
  for (auto& a : t.scalars) {
    a.a = renamed_var(r, a.a);
    if (a.binary()) a.b = renamed_var(r, a.b);
  }
  for (auto& f : t.word) {
    if (auto* g = std::get_if<Generator>(&f)) {
      *g = rename(*g, r);
    } else if (auto* u = std::get_if<Evolution>(&f)) {
      u->time = renamed_var(r, u->time);
    } else {
      auto& c = std::get<EvolutionCommutator>(f);
      c.gen = rename(c.gen, r);
      c.time = renamed_var(r, c.time);
    }
  }
  for (auto& v : t.bound_energy) v = renamed_var(r, v);
  for (auto& v : t.bound_time) v = renamed_var(r, v);
}

std::string fresh_energy(const std::set<std::string>& used) {
  for (long k = 1;; ++k) {
    std::string name = "_" + std::to_string(k);
    if (!used.count(name)) return name;
  }
}

std::string fresh_time(const std::string& base, const std::set<std::string>& used) {
  std::string name = base + "'";
  while (used.count(name)) name += "'";
  return name;
}

Term multiply(const Term& a_in, const Term& b_in) {
  Term a = a_in;
  Term b = b_in;
  std::set<std::string> used = variables(a);
  const std::set<std::string> vb = variables(b);
  used.insert(vb.begin(), vb.end());

  // b's bound variables must not collide with anything in a
  const std::set<std::string> va = variables(a);
  Renaming rb;
  for (const auto& v : b.bound_energy) {
    if (va.count(v)) {
      rb[v] = fresh_energy(used);
      used.insert(rb[v]);
    }
  }
  for (const auto& v : b.bound_time) {
    if (va.count(v)) {
      rb[v] = fresh_time(v, used);
      used.insert(rb[v]);
    }
  }
  rename(b, rb);

  // a's bound variables must not capture b's free ones
  const std::set<std::string> vb2 = variables(b);
  Renaming ra;
  for (const auto& v : a.bound_energy) {
    if (vb2.count(v)) {
      ra[v] = fresh_energy(used);
      used.insert(ra[v]);
    }
  }
  for (const auto& v : a.bound_time) {
    if (vb2.count(v)) {
      ra[v] = fresh_time(v, used);
      used.insert(ra[v]);
    }
  }
  rename(a, ra);

  Term out = std::move(a);
  out.coeff = out.coeff * b.coeff;
  out.two_pi_power += b.two_pi_power;
  out.sys.insert(out.sys.end(), b.sys.begin(), b.sys.end());
  out.scalars.insert(out.scalars.end(), b.scalars.begin(), b.scalars.end());
  out.word.insert(out.word.end(), b.word.begin(), b.word.end());
  out.bound_energy.insert(out.bound_energy.end(), b.bound_energy.begin(), b.bound_energy.end());
  out.bound_time.insert(out.bound_time.end(), b.bound_time.begin(), b.bound_time.end());
  return out;
}

Term splice(const Term& host, std::size_t pos, std::size_t len, const Term& insert) {
  // the insert shares the host's variables; only its own bound ones may clash
  const std::set<std::string> vh = variables(host);
  std::set<std::string> used = vh;
  const auto vi = variables(insert);
  used.insert(vi.begin(), vi.end());
  Term ins = insert;
  Renaming r;
  for (const auto& v : ins.bound_energy) {
    if (vh.count(v)) {
      r[v] = fresh_energy(used);
      used.insert(r[v]);
    }
  }
  for (const auto& v : ins.bound_time) {
    if (vh.count(v)) {
      r[v] = fresh_time(v, used);
      used.insert(r[v]);
    }
  }
  rename(ins, r);

  Term out = host;
  out.coeff = out.coeff * ins.coeff;
  out.two_pi_power += ins.two_pi_power;
  out.sys.insert(out.sys.end(), ins.sys.begin(), ins.sys.end());
  out.scalars.insert(out.scalars.end(), ins.scalars.begin(), ins.scalars.end());
  out.bound_energy.insert(out.bound_energy.end(), ins.bound_energy.begin(), ins.bound_energy.end());
  out.bound_time.insert(out.bound_time.end(), ins.bound_time.begin(), ins.bound_time.end());
  std::vector<Factor> word(host.word.begin(), host.word.begin() + static_cast<std::ptrdiff_t>(pos));
  word.insert(word.end(), ins.word.begin(), ins.word.end());
  word.insert(word.end(), host.word.begin() + static_cast<std::ptrdiff_t>(pos + len), host.word.end());
  out.word = std::move(word);
  return out;
}

Unfolded unfold(const Generator& g, std::set<std::string>& used) {
  if (!g.integrated()) return {g, {}};
  const std::string x = fresh_energy(used);
  used.insert(x);
  const std::string& e = g.energy()[0];
  if (g.kind() == GenKind::N) {
    return {Generator::make(g.kind(), g.eps1(), g.eps2(), {e, x}, g.time()), x};
  }
  return {Generator::make(g.kind(), g.eps1(), g.eps2(), {x, e}, g.time()), x};
}

bool is_generator(const Factor& f, GenKind kind) {
  const auto* g = std::get_if<Generator>(&f);
  return g && g->kind() == kind;
}

}  // namespace detail

// ---------------------------------------------------------------- table

namespace {

using detail::key;

Term kernel(const std::string& ta, const std::string& tb, const std::string& ea,
            const std::string& eb, Mode mode) {
  Term t;
  if (mode == Mode::symmetric) {
    t.scalars.push_back(ScalarAtom::dirac(std::min(ta, tb), std::max(ta, tb)));
    t.scalars.push_back(ScalarAtom::two_pi_delta(std::min(ea, eb), std::max(ea, eb)));
  } else if (!chrono_later(tb, ta)) {
    t.scalars.push_back(ScalarAtom::dplus(ta, tb));
    t.scalars.push_back(ScalarAtom::causal(ea, eb));
  } else {
    t.scalars.push_back(ScalarAtom::dplus(tb, ta));
    t.scalars.push_back(ScalarAtom::causal(eb, ea));
  }
  return t;
}

Generator adjoint_generator(const Generator& g) {
  const auto& e = g.energy();
  switch (g.kind()) {
    case GenKind::B: return Generator::Bdag(g.eps1(), g.eps2(), e, g.time());
    case GenKind::Bdag: return Generator::B(g.eps1(), g.eps2(), e, g.time());
    case GenKind::N:
      if (g.integrated()) throw AlgebraError("adjoint of integrated N needs unfolding");
      return Generator::N(g.eps2(), g.eps1(), {e[1], e[0]}, g.time());
  }
  throw AlgebraError("unknown generator kind");
}

// [B(E1,E2,t), B+(E3,E4,t')]
Expr comm_b_bdag(const Generator& a, const Generator& b, Mode mode) {
  if (a.eps1() != b.eps1() || a.eps2() != b.eps2()) return Expr::zero();
  const auto& A = a.energy();
  const auto& C = b.energy();
  Term t = kernel(a.time(), b.time(), A[0], A[1], mode);
  t.scalars.push_back(ScalarAtom::delta(A[0], C[0]));
  t.scalars.push_back(ScalarAtom::delta(A[1], C[1]));
  t.scalars.push_back(ScalarAtom::rho(a.eps1(), A[0]));
  t.scalars.push_back(ScalarAtom::w(a.eps2(), A[1]));
  return Expr(std::move(t));
}

// [B(E1,E2,t), N(E3,E4,t')]
Expr comm_b_n(const Generator& a, const Generator& b, Mode mode) {
  if (a.eps1() != b.eps1()) return Expr::zero();
  const auto& A = a.energy();
  const auto& C = b.energy();
  Term t = kernel(a.time(), b.time(), A[0], A[1], mode);
  t.scalars.push_back(ScalarAtom::delta(A[0], C[0]));
  t.scalars.push_back(ScalarAtom::rho(a.eps1(), A[0]));
  t.word.push_back(Generator::B(b.eps2(), a.eps2(), {C[1], A[1]}, b.time()));
  return Expr(std::move(t));
}

// [N(E1,E2,t), N(E3,E4,t')], both products placed at the chronologically
// earlier time; moving a product between the two times re-phases its kernel.
Expr comm_n_n(const Generator& a, const Generator& b, Mode mode) {
  const auto& A = a.energy();
  const auto& C = b.energy();
  const bool at_b = !chrono_later(b.time(), a.time());
  const std::string& tau = at_b ? b.time() : a.time();
  Expr out;
  if (a.eps2() == b.eps1()) {
    Term t = at_b ? kernel(a.time(), b.time(), C[0], A[0], mode)
                  : kernel(a.time(), b.time(), C[0], C[1], mode);
    t.scalars.push_back(ScalarAtom::delta(A[1], C[0]));
    t.scalars.push_back(ScalarAtom::rho(a.eps2(), A[1]));
    t.word.push_back(Generator::N(a.eps1(), b.eps2(), {A[0], C[1]}, tau));
    out += Expr(std::move(t));
  }
  if (a.eps1() == b.eps2()) {
    Term t = at_b ? kernel(a.time(), b.time(), A[1], A[0], mode)
                  : kernel(a.time(), b.time(), C[0], A[0], mode);
    t.coeff = -t.coeff;
    t.scalars.push_back(ScalarAtom::delta(A[0], C[1]));
    t.scalars.push_back(ScalarAtom::rho(a.eps1(), A[0]));
    t.word.push_back(Generator::N(b.eps1(), a.eps2(), {C[0], A[1]}, tau));
    out += Expr(std::move(t));
  }
  return out;
}

Expr commutator_double(const Generator& a, const Generator& b, Mode mode) {
  using K = GenKind;
  const K ka = a.kind();
  const K kb = b.kind();
  if (ka == kb && ka != K::N) return Expr::zero();
  if (ka == K::B && kb == K::Bdag) return comm_b_bdag(a, b, mode);
  if (ka == K::Bdag && kb == K::B) return -comm_b_bdag(b, a, mode);
  if (ka == K::B && kb == K::N) return comm_b_n(a, b, mode);
  if (ka == K::N && kb == K::B) return -comm_b_n(b, a, mode);
  if (ka == K::N && kb == K::N) return comm_n_n(a, b, mode);
  // [B+_a, N_b] = -[B_a, N_b^+]^+
  if (ka == K::Bdag && kb == K::N) {
    return -adjoint(comm_b_n(adjoint_generator(a), adjoint_generator(b), mode));
  }
  return adjoint(comm_b_n(adjoint_generator(b), adjoint_generator(a), mode));
}

}  // namespace

Expr commutator(const Generator& a, const Generator& b, Mode mode) {
  std::set<std::string> used = detail::variables(a);
  const auto vb = detail::variables(b);
  used.insert(vb.begin(), vb.end());
  const detail::Unfolded ua = detail::unfold(a, used);
  const detail::Unfolded ub = detail::unfold(b, used);
  Expr base = commutator_double(ua.gen, ub.gen, mode);
  std::vector<std::string> bound;
  if (!ua.bound.empty()) bound.push_back(ua.bound);
  if (!ub.bound.empty()) bound.push_back(ub.bound);
  if (bound.empty()) return canonicalize(base);
  base = base.integrate_energy(bound);
  return canonicalize(fold_integrals(contract_deltas(base, bound)));
}

Expr commutator(const Expr& a, const Expr& b) { return a * b - b * a; }

// ---------------------------------------------------------------- adjoint

namespace {

Term adjoint_term(const Term& t) {
  Term out;
  out.coeff = t.coeff.conj();
  out.two_pi_power = t.two_pi_power;
  out.bound_energy = t.bound_energy;
  out.bound_time = t.bound_time;
  for (auto it = t.sys.rbegin(); it != t.sys.rend(); ++it) {
    SysSym s = *it;
    if (s.kind == SysSym::Kind::D) {
      s.eps = 1 - s.eps;
    } else {
      s.dagger = !s.dagger;
    }
    out.sys.push_back(s);
  }
  for (ScalarAtom a : t.scalars) {
    if (a.kind == AtomKind::causal) std::swap(a.a, a.b);
    if (a.kind == AtomKind::gamma) a.conj = !a.conj;
    out.scalars.push_back(a);
  }
  std::set<std::string> used = detail::variables(t);
  for (auto it = t.word.rbegin(); it != t.word.rend(); ++it) {
    if (const auto* g = std::get_if<Generator>(&*it)) {
      if (g->kind() == GenKind::N && g->integrated()) {
        detail::Unfolded u = detail::unfold(*g, used);
        out.bound_energy.push_back(u.bound);
        out.word.push_back(adjoint_generator(u.gen));
      } else {
        out.word.push_back(adjoint_generator(*g));
      }
    } else if (const auto* u = std::get_if<Evolution>(&*it)) {
      out.word.push_back(Evolution{u->time, !u->dagger});
    } else {
      EvolutionCommutator c = std::get<EvolutionCommutator>(*it);
      c.dagger = !c.dagger;
      out.word.push_back(c);
    }
  }
  return out;
}

}  // namespace

Expr adjoint(const Expr& x) {
  std::vector<Term> out;
  out.reserve(x.size());
  for (const auto& t : x.terms()) out.push_back(adjoint_term(t));
  return Expr(std::move(out));
}

// ---------------------------------------------------------------- ordering

namespace {

int rank(GenKind k) {
  switch (k) {
    case GenKind::Bdag: return 0;
    case GenKind::N: return 1;
    case GenKind::B: return 2;
  }
  return 3;
}

enum class Step { none, swap, swap_with_commutator };

// Ordering key blind to the names of integration variables.
std::string order_key(const Generator& g, const std::vector<std::string>& bound) {
  std::string k = std::to_string(static_cast<int>(g.kind())) + std::to_string(g.eps1()) +
                  std::to_string(g.eps2()) + "(";
  for (const auto& v : g.energy()) {
    k += std::find(bound.begin(), bound.end(), v) != bound.end() ? "~" : v;
    k += ",";
  }
  return k + ";" + g.time() + ")";
}

Step step_for(const Factor& x, const Factor& y, const std::vector<std::string>& bound) {
  const auto* gx = std::get_if<Generator>(&x);
  if (!gx) return Step::none;
  if (const auto* u = std::get_if<Evolution>(&y)) {
    if (gx->kind() == GenKind::B && !u->dagger && chrono_later(gx->time(), u->time)) {
      return Step::swap;
    }
    return Step::none;
  }
  const auto* gy = std::get_if<Generator>(&y);
  if (!gy) return Step::none;
  const int rx = rank(gx->kind());
  const int ry = rank(gy->kind());
  if (rx > ry) return Step::swap_with_commutator;
  if (rx < ry) return Step::none;
  if (order_key(*gx, bound) <= order_key(*gy, bound)) return Step::none;
  return gx->kind() == GenKind::N ? Step::swap_with_commutator : Step::swap;
}

}  // namespace

Expr normal_order(const Expr& x, Mode mode) {
  std::vector<Term> work = x.terms();
  std::vector<Term> done;
  std::size_t guard = 0;
  while (!work.empty()) {
    if (++guard > 2000000) throw AlgebraError("normal ordering did not terminate");
    Term t = std::move(work.back());
    work.pop_back();
    std::size_t i = 0;
    Step s = Step::none;
    for (; i + 1 < t.word.size(); ++i) {
      s = step_for(t.word[i], t.word[i + 1], t.bound_energy);
      if (s != Step::none) break;
    }
    if (s == Step::none) {
      done.push_back(std::move(t));
      continue;
    }
    const Generator gx = std::get<Generator>(t.word[i]);
    if (s == Step::swap_with_commutator) {
      const Generator gy = std::get<Generator>(t.word[i + 1]);
      const Expr c_xy = commutator(gx, gy, mode);
      for (const auto& c : c_xy.terms()) {
        work.push_back(detail::splice(t, i, 2, c));
      }
    }
    std::swap(t.word[i], t.word[i + 1]);
    work.push_back(std::move(t));
  }
  return canonicalize(Expr(std::move(done)));
}

Expr vacuum_expectation(const Expr& x, Mode mode) {
  const Expr ordered = normal_order(x, mode);
  std::vector<Term> kept;
  for (const auto& t : ordered.terms()) {
    if (!t.word.empty()) {
      if (detail::is_generator(t.word.front(), GenKind::Bdag) ||
          detail::is_generator(t.word.front(), GenKind::N) ||
          detail::is_generator(t.word.back(), GenKind::B) ||
          detail::is_generator(t.word.back(), GenKind::N)) {
        continue;
      }
    }
    kept.push_back(t);
  }
  return Expr(std::move(kept));
}

Expr expand_number(const Expr& x) {
  std::vector<Term> out;
  for (const auto& t : x.terms()) {
    std::vector<Term> acc{t};
    for (auto& a : acc) a.word.clear();
    for (const auto& f : t.word) {
      const auto* g = std::get_if<Generator>(&f);
      if (!g || g->kind() != GenKind::N) {
        for (auto& a : acc) a.word.push_back(f);
        continue;
      }
      const std::string& e1 = g->energy()[0];
      std::vector<Term> next;
      for (const auto& a : acc) {
        for (int ep = 0; ep < 2; ++ep) {
          Term r = a;
          r.scalars.push_back(ScalarAtom::n_inv(ep, e1));
          if (g->integrated()) {
            r.word.push_back(Generator::Bdag(g->eps1(), ep, {e1}, g->time()));
            r.word.push_back(Generator::B(g->eps2(), ep, {e1}, g->time()));
          } else {
            std::set<std::string> used = detail::variables(t);
            for (const auto& v : detail::variables(a)) used.insert(v);
            const std::string x_new = detail::fresh_energy(used);
            r.bound_energy.push_back(x_new);
            r.word.push_back(Generator::Bdag(g->eps1(), ep, {x_new, e1}, g->time()));
            r.word.push_back(Generator::B(g->eps2(), ep, {g->energy()[1], e1}, g->time()));
          }
          next.push_back(std::move(r));
        }
      }
      acc = std::move(next);
    }
    for (auto& a : acc) out.push_back(std::move(a));
  }
  return Expr(std::move(out));
}

Expr to_symmetric(const Expr& x) {
  std::vector<Term> out = x.terms();
  for (auto& t : out) {
    for (auto& a : t.scalars) {
      if (a.kind == AtomKind::dplus) {
        a.kind = AtomKind::dirac;
        if (a.b < a.a) std::swap(a.a, a.b);
      } else if (a.kind == AtomKind::causal) {
        a.kind = AtomKind::two_pi_delta;
        if (a.b < a.a) std::swap(a.a, a.b);
      } else if (a.kind == AtomKind::gamma) {
        // the integrated kernel collapses onto the density
        a = ScalarAtom::rho(a.eps, a.a);
        ++t.two_pi_power;
      }
    }
  }
  return canonicalize(Expr(std::move(out)));
}

bool equivalent(const Expr& a, const Expr& b) { return canonicalize(a - b).empty(); }

}  // namespace ldl::algebra

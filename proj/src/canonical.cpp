#include <algorithm>
#include <map>
#include <numeric>
#include <set>

#include "algebra_detail.hpp"
#include "ldl/errors.hpp"

namespace ldl::algebra {

namespace {

using detail::Renaming;

bool contains(const std::vector<std::string>& xs, const std::string& v) {
  return std::find(xs.begin(), xs.end(), v) != xs.end();
}

void erase_value(std::vector<std::string>& xs, const std::string& v) {
  xs.erase(std::remove(xs.begin(), xs.end(), v), xs.end());
}

// Rename occurrences but leave the bound lists alone.
void substitute(Term& t, const Renaming& r) {
  auto be = t.bound_energy;
  auto bt = t.bound_time;
  detail::rename(t, r);
  t.bound_energy = std::move(be);
  t.bound_time = std::move(bt);
}

int occurrences(const Term& t, const std::string& v) {
  int n = 0;
  for (const auto& s : t.sys) n += s.kind == SysSym::Kind::T && s.energy == v;
  for (const auto& a : t.scalars) n += (a.a == v) + (a.binary() && a.b == v);
  auto gen = [&](const Generator& g) {
    for (const auto& e : g.energy()) n += e == v;
    n += g.time() == v;
  };
  for (const auto& f : t.word) {
    if (const auto* g = std::get_if<Generator>(&f)) gen(*g);
    if (const auto* u = std::get_if<Evolution>(&f)) n += u->time == v;
    if (const auto* c = std::get_if<EvolutionCommutator>(&f)) {
      gen(c->gen);
      n += c->time == v;
    }
  }
  return n;
}

// ------------------------------------------------------------ one pass

struct UnionFind {
  std::map<std::string, std::string> parent;
  std::string find(const std::string& v) {
    auto it = parent.find(v);
    if (it == parent.end()) {
      parent[v] = v;
      return v;
    }
    if (it->second == v) return v;
    const std::string root = find(it->second);
    parent[v] = root;
    return root;
  }
};

void resolve_energy_deltas(Term& t) {
  UnionFind uf;
  std::map<std::string, int> two_pi;  // keyed by root after all unions
  std::vector<ScalarAtom> rest;
  std::vector<std::pair<std::string, std::string>> edges;
  for (const auto& a : t.scalars) {
    if (!a.is_energy_delta()) {
      rest.push_back(a);
      continue;
    }
    if (a.a == a.b) throw AlgebraError("energy delta at coincident arguments: " + detail::key(a));
    const std::string ra = uf.find(a.a);
    const std::string rb = uf.find(a.b);
    if (ra == rb) throw AlgebraError("cyclic product of energy deltas at " + detail::key(a));
    uf.parent[ra] = rb;
    edges.emplace_back(a.a, a.b);
  }
  if (edges.empty()) return;
  for (const auto& a : t.scalars) {
    if (a.kind == AtomKind::two_pi_delta) ++two_pi[uf.find(a.a)];
  }

  std::map<std::string, std::vector<std::string>> classes;
  for (const auto& [v, p] : uf.parent) classes[uf.find(v)].push_back(v);

  Renaming r;
  std::vector<ScalarAtom> emitted;
  std::vector<std::string> unbind;
  for (auto& [root, members] : classes) {
    std::sort(members.begin(), members.end(), [&](const std::string& x, const std::string& y) {
      const bool bx = contains(t.bound_energy, x);
      const bool by = contains(t.bound_energy, y);
      if (bx != by) return !bx;
      return x < y;
    });
    const std::string& rep = members.front();
    int k = two_pi[root];
    for (std::size_t i = 1; i < members.size(); ++i) {
      const std::string& m = members[i];
      r[m] = rep;
      if (contains(t.bound_energy, m)) {
        // integrate the bound member against its delta
        unbind.push_back(m);
        if (k > 0) {
          ++t.two_pi_power;
          --k;
        }
      }
    }
    for (std::size_t i = 1; i < members.size(); ++i) {
      const std::string& m = members[i];
      if (contains(t.bound_energy, m)) continue;
      const AtomKind kind = k > 0 ? AtomKind::two_pi_delta : AtomKind::delta;
      if (k > 0) --k;
      emitted.push_back({kind, -1, false, rep, m});
    }
  }
  t.scalars = std::move(rest);
  substitute(t, r);
  for (const auto& m : unbind) erase_value(t.bound_energy, m);
  t.scalars.insert(t.scalars.end(), emitted.begin(), emitted.end());
}

void cancel_number_weight(Term& t) {
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t i = 0; i < t.scalars.size() && !changed; ++i) {
      if (t.scalars[i].kind != AtomKind::n_inv) continue;
      for (std::size_t j = 0; j < t.scalars.size(); ++j) {
        const auto& w = t.scalars[j];
        if (w.kind == AtomKind::w && w.eps == t.scalars[i].eps && w.a == t.scalars[i].a) {
          t.scalars.erase(t.scalars.begin() + static_cast<std::ptrdiff_t>(std::max(i, j)));
          t.scalars.erase(t.scalars.begin() + static_cast<std::ptrdiff_t>(std::min(i, j)));
          changed = true;
          break;
        }
      }
    }
  }
}

void check_singular_products(const Term& t) {
  for (const auto& a : t.scalars) {
    if (a.kind == AtomKind::causal && a.a == a.b) {
      throw AlgebraError("causal kernel at coincident energies: " + detail::key(a));
    }
  }
  for (std::size_t i = 1; i < t.scalars.size(); ++i) {
    const auto& a = t.scalars[i];
    if (a == t.scalars[i - 1] &&
        (a.kind == AtomKind::causal || a.kind == AtomKind::dplus || a.kind == AtomKind::dirac)) {
      throw AlgebraError("product of identical singular kernels: " + detail::key(a));
    }
  }
}

void sort_commuting_runs(Term& t) {
  auto run_kind = [](const Factor& f) -> int {
    const auto* g = std::get_if<Generator>(&f);
    if (!g || g->kind() == GenKind::N) return -1;
    return static_cast<int>(g->kind());
  };
  std::size_t i = 0;
  while (i < t.word.size()) {
    const int k = run_kind(t.word[i]);
    std::size_t j = i + 1;
    if (k >= 0) {
      while (j < t.word.size() && run_kind(t.word[j]) == k) ++j;
      std::sort(t.word.begin() + static_cast<std::ptrdiff_t>(i),
                t.word.begin() + static_cast<std::ptrdiff_t>(j),
                [](const Factor& x, const Factor& y) { return detail::key(x) < detail::key(y); });
    }
    i = j;
  }
}

// Kernel chains over free times are re-rooted at the latest member.
void resolve_time_kernels(Term& t) {
  UnionFind uf;
  std::map<std::string, std::set<AtomKind>> kinds;
  std::vector<ScalarAtom> rest;
  std::vector<ScalarAtom> atoms;
  for (const auto& a : t.scalars) {
    if (!a.is_time() || contains(t.bound_time, a.a) || contains(t.bound_time, a.b)) {
      rest.push_back(a);
      continue;
    }
    atoms.push_back(a);
  }
  if (atoms.size() < 2) return;
  for (const auto& a : atoms) {
    const std::string ra = uf.find(a.a);
    const std::string rb = uf.find(a.b);
    if (ra == rb) throw AlgebraError("cyclic product of time kernels at " + detail::key(a));
    uf.parent[ra] = rb;
  }
  for (const auto& a : atoms) kinds[uf.find(a.a)].insert(a.kind);
  std::map<std::string, std::vector<std::string>> classes;
  for (const auto& [v, p] : uf.parent) classes[uf.find(v)].push_back(v);
  std::vector<ScalarAtom> emitted;
  Renaming same_time;
  for (const auto& a : atoms) {
    if (kinds[uf.find(a.a)].size() > 1) emitted.push_back(a);
  }
  for (auto& [root, members] : classes) {
    const auto& k = kinds[root];
    if (k.size() != 1) continue;
    const std::string rep = *std::min_element(
        members.begin(), members.end(),
        [](const std::string& x, const std::string& y) { return chrono_later(x, y); });
    for (const auto& m : members) {
      if (m == rep) continue;
      if (*k.begin() == AtomKind::dirac) {
        same_time[m] = rep;
        emitted.push_back({AtomKind::dirac, -1, false, std::min(rep, m), std::max(rep, m)});
      } else {
        emitted.push_back({AtomKind::dplus, -1, false, rep, m});
      }
    }
  }
  rest.insert(rest.end(), emitted.begin(), emitted.end());
  t.scalars = std::move(rest);
  // a full delta identifies the times, so operator labels follow the representative
  Term ops;
  ops.word = std::move(t.word);
  detail::rename(ops, same_time);
  t.word = std::move(ops.word);
}

// Densities of the two bands have disjoint supports.
bool crosses_bands(const Term& t) {
  std::map<std::string, int> seen;
  for (const auto& a : t.scalars) {
    if (a.kind != AtomKind::rho && a.kind != AtomKind::w) continue;
    seen[a.a] |= 1 << a.eps;
  }
  return std::any_of(seen.begin(), seen.end(), [](const auto& kv) { return kv.second == 3; });
}

void fold_term(Term& t);

void pass(Term& t) {
  resolve_energy_deltas(t);
  resolve_time_kernels(t);
  cancel_number_weight(t);
  std::sort(t.scalars.begin(), t.scalars.end());
  check_singular_products(t);
  sort_commuting_runs(t);
  std::sort(t.bound_energy.begin(), t.bound_energy.end());
  t.bound_energy.erase(std::unique(t.bound_energy.begin(), t.bound_energy.end()), t.bound_energy.end());
  std::sort(t.bound_time.begin(), t.bound_time.end());
  t.bound_time.erase(std::unique(t.bound_time.begin(), t.bound_time.end()), t.bound_time.end());
}

Term canonical_term(Term t) {
  pass(t);
  fold_term(t);
  pass(t);
  const std::vector<std::string> bound = t.bound_energy;
  if (bound.empty()) return t;
  if (bound.size() > 6) throw AlgebraError("too many bound energy variables for canonical renaming");

  std::set<std::string> taken = detail::variables(t);
  for (const auto& b : bound) taken.erase(b);
  std::vector<std::string> targets;
  for (long k = 1; targets.size() < bound.size(); ++k) {
    std::string name = "_" + std::to_string(k);
    if (!taken.count(name)) targets.push_back(name);
  }

  std::vector<std::size_t> perm(bound.size());
  std::iota(perm.begin(), perm.end(), 0);
  Term best;
  std::string best_key;
  bool have = false;
  do {
    Renaming r;
    for (std::size_t i = 0; i < bound.size(); ++i) r[bound[i]] = targets[perm[i]];
    Term cand = t;
    detail::rename(cand, r);
    pass(cand);
    std::string k = detail::body_key(cand);
    if (!have || k < best_key) {
      best = std::move(cand);
      best_key = std::move(k);
      have = true;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

}  // namespace

Expr canonicalize(const Expr& x) {
  std::map<std::string, Term> merged;
  for (const auto& t : x.terms()) {
    if (t.coeff.is_zero()) continue;
    Term c = canonical_term(t);
    if (crosses_bands(c)) continue;
    const std::string k = detail::body_key(c);
    auto it = merged.find(k);
    if (it == merged.end()) {
      merged.emplace(k, std::move(c));
    } else {
      it->second.coeff = it->second.coeff + c.coeff;
    }
  }
  std::vector<Term> out;
  for (auto& [k, t] : merged) {
    if (!t.coeff.is_zero()) out.push_back(std::move(t));
  }
  return Expr(std::move(out));
}

// ------------------------------------------------------------ contraction

namespace {

void contract_term(Term& t, const std::string& v) {
  const bool energy = contains(t.bound_energy, v);
  const bool time = contains(t.bound_time, v);
  if (!energy && !time) return;
  std::vector<std::size_t> hits;
  for (std::size_t i = 0; i < t.scalars.size(); ++i) {
    const auto& a = t.scalars[i];
    const bool relevant = energy ? a.is_energy_delta() : a.is_time();
    if (relevant && (a.a == v || a.b == v)) hits.push_back(i);
  }
  if (hits.empty()) return;
  // sift against one delta; the others are rewritten and must stay non-degenerate
  std::size_t pick = hits[0];
  for (auto h : hits) {
    if (t.scalars[h].kind == AtomKind::delta || t.scalars[h].kind == AtomKind::dirac) {
      pick = h;
      break;
    }
  }
  hits = {pick};
  const ScalarAtom atom = t.scalars[hits[0]];
  const std::string other = atom.a == v ? atom.b : atom.a;
  if (other == v) throw AlgebraError("delta of '" + v + "' against itself");
  t.scalars.erase(t.scalars.begin() + static_cast<std::ptrdiff_t>(hits[0]));
  if (atom.kind == AtomKind::two_pi_delta) ++t.two_pi_power;
  if (energy) {
    erase_value(t.bound_energy, v);
  } else {
    erase_value(t.bound_time, v);
  }
  substitute(t, {{v, other}});
  for (const auto& a : t.scalars) {
    if ((a.is_energy_delta() || a.is_time()) && a.a == a.b && (a.a == other)) {
      if (a.is_time() && a.kind == AtomKind::dplus) continue;
      throw AlgebraError("bound variable '" + v + "' appears in incompatible deltas");
    }
  }
}

}  // namespace

Expr contract_deltas(const Expr& x, const std::vector<std::string>& bound_vars) {
  std::vector<Term> out = x.terms();
  for (auto& t : out) {
    for (const auto& v : bound_vars) contract_term(t, v);
  }
  return Expr(std::move(out));
}

// ------------------------------------------------------------ folding

namespace {

bool fold_gamma(Term& t, const std::string& x) {
  if (occurrences(t, x) != 2) return false;
  int rho = -1;
  int causal = -1;
  for (std::size_t i = 0; i < t.scalars.size(); ++i) {
    const auto& a = t.scalars[i];
    if (a.kind == AtomKind::rho && a.a == x) rho = static_cast<int>(i);
    if (a.kind == AtomKind::causal && (a.a == x) != (a.b == x)) causal = static_cast<int>(i);
  }
  if (rho < 0 || causal < 0) return false;
  const ScalarAtom r = t.scalars[static_cast<std::size_t>(rho)];
  const ScalarAtom c = t.scalars[static_cast<std::size_t>(causal)];
  const bool conj = c.b == x;
  const std::string e = conj ? c.a : c.b;
  t.scalars.erase(t.scalars.begin() + std::max(rho, causal));
  t.scalars.erase(t.scalars.begin() + std::min(rho, causal));
  t.scalars.push_back(ScalarAtom::gamma(r.eps, e, conj));
  erase_value(t.bound_energy, x);
  return true;
}

bool fold_generator(Term& t, const std::string& x) {
  if (occurrences(t, x) != 1) return false;
  for (auto& f : t.word) {
    auto* g = std::get_if<Generator>(&f);
    if (!g || g->integrated()) continue;
    const auto& e = g->energy();
    const std::size_t slot = g->kind() == GenKind::N ? 1 : 0;
    if (e[slot] != x) continue;
    *g = Generator::make(g->kind(), g->eps1(), g->eps2(), {e[1 - slot]}, g->time());
    erase_value(t.bound_energy, x);
    return true;
  }
  return false;
}

void fold_term(Term& t) {
  bool changed = true;
  while (changed) {
    changed = false;
    for (const auto& v : std::vector<std::string>(t.bound_energy)) {
      if (fold_gamma(t, v) || fold_generator(t, v)) {
        changed = true;
        break;
      }
    }
  }
}

}  // namespace

Expr fold_integrals(const Expr& x) {
  std::vector<Term> out = x.terms();
  for (auto& t : out) fold_term(t);
  return Expr(std::move(out));
}

}  // namespace ldl::algebra

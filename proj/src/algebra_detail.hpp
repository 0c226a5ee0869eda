#pragma once

#include <functional>
#include <map>
#include <set>
#include <string>

#include "ldl/noise_algebra.hpp"

namespace ldl::algebra::detail {

using Renaming = std::map<std::string, std::string>;

std::set<std::string> variables(const Term& t);
std::set<std::string> variables(const Generator& g);

/// Simultaneous substitution over every variable occurrence, bound lists included.
void rename(Term& t, const Renaming& r);
Generator rename(const Generator& g, const Renaming& r);

/// Next unused energy name of the form _k.
std::string fresh_energy(const std::set<std::string>& used);
/// Decorate `base` with primes until unused.
std::string fresh_time(const std::string& base, const std::set<std::string>& used);

/// Product of two terms with capture-avoiding renaming of bound variables.
Term multiply(const Term& a, const Term& b);

/// Replace word[pos, pos+len) of `host` by the noise word of `insert`,
/// multiplying in the coefficient, scalars, system word and bound variables.
/// Free variables of `insert` refer to the host's variables.
Term splice(const Term& host, std::size_t pos, std::size_t len, const Term& insert);

/// Integrated generator as a double-slot one with a fresh bound energy.
struct Unfolded {
  Generator gen;
  std::string bound;  // empty if already double-slot
};
Unfolded unfold(const Generator& g, std::set<std::string>& used);

std::string key(const Generator& g);
std::string key(const Factor& f);
std::string key(const SysSym& s);
std::string key(const ScalarAtom& a);
/// Everything but the coefficient; identical keys merge.
std::string body_key(const Term& t);

bool is_generator(const Factor& f, GenKind kind);

}  // namespace ldl::algebra::detail

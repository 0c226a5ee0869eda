#include <sstream>

#include "algebra_detail.hpp"
#include "ldl/errors.hpp"

namespace ldl::algebra {

namespace detail {

namespace {

const char* kind_tag(GenKind k) {
  switch (k) {
    case GenKind::B: return "B";
    case GenKind::Bdag: return "Bd";
    case GenKind::N: return "N";
  }
  return "?";
}

std::string join(const std::vector<std::string>& xs, const char* sep) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += sep;
    out += xs[i];
  }
  return out;
}

}  // namespace

std::string key(const Generator& g) {
  std::string s = kind_tag(g.kind());
  s += std::to_string(g.eps1());
  s += std::to_string(g.eps2());
  s += "(" + join(g.energy(), ",") + ";" + g.time() + ")";
  return s;
}

std::string key(const Factor& f) {
  if (const auto* g = std::get_if<Generator>(&f)) return key(*g);
  if (const auto* u = std::get_if<Evolution>(&f)) {
    return std::string(u->dagger ? "U+(" : "U(") + u->time + ")";
  }
  const auto& c = std::get<EvolutionCommutator>(f);
  return "[" + key(c.gen) + ",U(" + c.time + ")]" + (c.dagger ? "+" : "");
}

std::string key(const SysSym& s) {
  if (s.kind == SysSym::Kind::D) return "D" + std::to_string(s.eps);
  return "T" + std::to_string(s.eps) + (s.dagger ? "+(" : "(") + s.energy + ")";
}

std::string key(const ScalarAtom& a) {
  switch (a.kind) {
    case AtomKind::delta: return "delta(" + a.a + "," + a.b + ")";
    case AtomKind::two_pi_delta: return "tpd(" + a.a + "," + a.b + ")";
    case AtomKind::causal: return "causal(" + a.a + "," + a.b + ")";
    case AtomKind::dplus: return "dplus(" + a.a + "," + a.b + ")";
    case AtomKind::dirac: return "dirac(" + a.a + "," + a.b + ")";
    case AtomKind::rho: return "rho" + std::to_string(a.eps) + "(" + a.a + ")";
    case AtomKind::w: return "w" + std::to_string(a.eps) + "(" + a.a + ")";
    case AtomKind::gamma:
      return std::string(a.conj ? "gammac" : "gamma") + std::to_string(a.eps) + "(" + a.a + ")";
    case AtomKind::n_inv: return "ninv" + std::to_string(a.eps) + "(" + a.a + ")";
  }
  return "?";
}

std::string body_key(const Term& t) {
  std::string s = "tp" + std::to_string(t.two_pi_power);
  s += " be{" + join(t.bound_energy, " ") + "}";
  s += " bt{" + join(t.bound_time, " ") + "}";
  s += " sys{";
  for (std::size_t i = 0; i < t.sys.size(); ++i) s += (i ? " " : "") + key(t.sys[i]);
  s += "} sc{";
  for (std::size_t i = 0; i < t.scalars.size(); ++i) s += (i ? " " : "") + key(t.scalars[i]);
  s += "} nz{";
  for (std::size_t i = 0; i < t.word.size(); ++i) s += (i ? " " : "") + key(t.word[i]);
  s += "}";
  return s;
}

}  // namespace detail

std::string serialize(const Generator& g) { return detail::key(g); }

std::string serialize(const Term& t) { return t.coeff.str() + " " + detail::body_key(t); }

std::string serialize(const Expr& x) {
  if (x.empty()) return "0";
  std::string out;
  for (std::size_t i = 0; i < x.terms().size(); ++i) {
    if (i) out += "\n";
    out += serialize(x.terms()[i]);
  }
  return out;
}

namespace {

[[noreturn]] void bad(const std::string& what, const std::string& text) {
  throw ValidationError("cannot parse expression: " + what + " in '" + text + "'");
}

// "name(args)" -> name, args split on ',' and ';'
struct Call {
  std::string head;
  std::vector<std::string> args;
};

Call split_call(const std::string& tok) {
  const auto open = tok.find('(');
  if (open == std::string::npos || tok.back() != ')') bad("expected call", tok);
  Call c{tok.substr(0, open), {}};
  std::string cur;
  for (std::size_t i = open + 1; i + 1 < tok.size(); ++i) {
    if (tok[i] == ',' || tok[i] == ';') {
      c.args.push_back(cur);
      cur.clear();
    } else {
      cur += tok[i];
    }
  }
  c.args.push_back(cur);
  return c;
}

Generator parse_generator(const std::string& tok) {
  Call c = split_call(tok);
  GenKind kind;
  std::string labels;
  if (c.head.rfind("Bd", 0) == 0) {
    kind = GenKind::Bdag;
    labels = c.head.substr(2);
  } else if (c.head.rfind("B", 0) == 0) {
    kind = GenKind::B;
    labels = c.head.substr(1);
  } else if (c.head.rfind("N", 0) == 0) {
    kind = GenKind::N;
    labels = c.head.substr(1);
  } else {
    bad("unknown generator", tok);
  }
  if (labels.size() != 2 || c.args.size() < 2) bad("malformed generator", tok);
  std::vector<std::string> energy(c.args.begin(), c.args.end() - 1);
  return Generator::make(kind, labels[0] - '0', labels[1] - '0', energy, c.args.back());
}

Factor parse_factor(const std::string& tok) {
  if (tok.rfind("U(", 0) == 0 || tok.rfind("U+(", 0) == 0) {
    Call c = split_call(tok);
    if (c.args.size() != 1) bad("malformed evolution", tok);
    return Evolution{c.args[0], c.head == "U+"};
  }
  if (!tok.empty() && tok[0] == '[') {
    const bool dagger = tok.back() == '+';
    const std::string inner = tok.substr(1, tok.size() - (dagger ? 3 : 2));
    const auto sep = inner.find("),U(");
    if (sep == std::string::npos) bad("malformed evolution commutator", tok);
    Generator g = parse_generator(inner.substr(0, sep + 1));
    Call u = split_call(inner.substr(sep + 2));
    return EvolutionCommutator{g, u.args.at(0), dagger};
  }
  return parse_generator(tok);
}

SysSym parse_sys(const std::string& tok) {
  if (tok.size() == 2 && tok[0] == 'D') return SysSym::D(tok[1] - '0');
  Call c = split_call(tok);
  if (c.head.empty() || c.head[0] != 'T' || c.args.size() != 1) bad("malformed system symbol", tok);
  SysSym s = SysSym::T(c.head[1] - '0', c.args[0]);
  s.dagger = c.head.size() == 3 && c.head[2] == '+';
  return s;
}

ScalarAtom parse_atom(const std::string& tok) {
  Call c = split_call(tok);
  auto two = [&](AtomKind k) {
    if (c.args.size() != 2) bad("expected two arguments", tok);
    return ScalarAtom{k, -1, false, c.args[0], c.args[1]};
  };
  if (c.head == "delta") return two(AtomKind::delta);
  if (c.head == "tpd") return two(AtomKind::two_pi_delta);
  if (c.head == "causal") return two(AtomKind::causal);
  if (c.head == "dplus") return two(AtomKind::dplus);
  if (c.head == "dirac") return two(AtomKind::dirac);
  if (c.args.size() != 1 || c.head.empty()) bad("malformed atom", tok);
  const int eps = c.head.back() - '0';
  const std::string name = c.head.substr(0, c.head.size() - 1);
  if (eps != 0 && eps != 1) bad("label must be 0 or 1", tok);
  if (name == "rho") return ScalarAtom::rho(eps, c.args[0]);
  if (name == "w") return ScalarAtom::w(eps, c.args[0]);
  if (name == "gamma") return ScalarAtom::gamma(eps, c.args[0]);
  if (name == "gammac") return ScalarAtom::gamma(eps, c.args[0], true);
  if (name == "ninv") return ScalarAtom::n_inv(eps, c.args[0]);
  bad("unknown atom", tok);
}

std::vector<std::string> braced(const std::string& line, const std::string& tag) {
  const auto at = line.find(" " + tag + "{");
  if (at == std::string::npos) bad("missing " + tag, line);
  const auto open = at + tag.size() + 2;
  int depth = 0;
  std::size_t close = open;
  for (; close < line.size(); ++close) {
    if (line[close] == '{') ++depth;
    if (line[close] == '}') {
      if (depth == 0) break;
      --depth;
    }
  }
  if (close == line.size()) bad("unterminated " + tag, line);
  std::istringstream in(line.substr(open, close - open));
  std::vector<std::string> out;
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

Term parse_term(const std::string& line) {
  Term t;
  const auto close = line.find(')');
  if (line.empty() || line[0] != '(' || close == std::string::npos) bad("missing coefficient", line);
  const std::string coeff = line.substr(1, close - 1);
  const auto comma = coeff.find(',');
  if (comma == std::string::npos) bad("malformed coefficient", line);
  t.coeff = {Rational::parse(coeff.substr(0, comma)), Rational::parse(coeff.substr(comma + 1))};
  const auto tp = line.find(" tp", close);
  if (tp == std::string::npos) bad("missing 2pi power", line);
  try {
    t.two_pi_power = std::stoi(line.substr(tp + 3));
  } catch (const std::logic_error&) {
    bad("malformed 2pi power", line);
  }
  t.bound_energy = braced(line, "be");
  t.bound_time = braced(line, "bt");
  for (const auto& s : braced(line, "sys")) t.sys.push_back(parse_sys(s));
  for (const auto& s : braced(line, "sc")) t.scalars.push_back(parse_atom(s));
  for (const auto& s : braced(line, "nz")) t.word.push_back(parse_factor(s));
  return t;
}

}  // namespace

Expr parse_expr(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::vector<Term> terms;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line == "0") continue;
    terms.push_back(parse_term(line));
  }
  return Expr(std::move(terms));
}

}  // namespace ldl::algebra

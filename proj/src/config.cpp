#include "ldl/config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <toml.hpp>

#include "ldl/errors.hpp"

namespace ldl {

namespace {

namespace fs = std::filesystem;

std::string fnv1a(std::string_view text) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string read_file(const fs::path& p, const std::string& key) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ValidationError(key + ": cannot read file " + p.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// One TOML table with its dotted path; every key must be consumed before finish().
class Section {
 public:
  Section(const toml::table& t, std::string path) : t_(t), path_(std::move(path)) {}

  std::string at(std::string_view key) const { return path_.empty() ? std::string(key) : path_ + "." + std::string(key); }
  const std::string& path() const { return path_; }

  std::optional<double> number(std::string_view key) {
    const toml::node* n = take(key);
    if (!n) return std::nullopt;
    return as_number(*n, at(key));
  }

  std::optional<std::int64_t> integer(std::string_view key) {
    const toml::node* n = take(key);
    if (!n) return std::nullopt;
    if (!n->is_integer()) throw ValidationError(at(key) + ": expected an integer");
    return n->value<std::int64_t>();
  }

  std::optional<std::string> string(std::string_view key) {
    const toml::node* n = take(key);
    if (!n) return std::nullopt;
    if (!n->is_string()) throw ValidationError(at(key) + ": expected a string");
    return n->value<std::string>();
  }

  std::optional<std::vector<double>> numbers(std::string_view key) {
    const toml::node* n = take(key);
    if (!n) return std::nullopt;
    const toml::array* a = n->as_array();
    if (!a) throw ValidationError(at(key) + ": expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < a->size(); ++i) out.push_back(as_number(*a->get(i), at(key) + "[" + std::to_string(i) + "]"));
    return out;
  }

  /// Rows of entries; an entry is a real number or a [re, im] pair.
  std::optional<std::vector<std::vector<cplx>>> matrix(std::string_view key) {
    const toml::node* n = take(key);
    if (!n) return std::nullopt;
    const toml::array* a = n->as_array();
    if (!a) throw ValidationError(at(key) + ": expected an array of rows");
    std::vector<std::vector<cplx>> out;
    for (std::size_t i = 0; i < a->size(); ++i) {
      const std::string row_key = at(key) + "[" + std::to_string(i) + "]";
      const toml::array* row = a->get(i)->as_array();
      if (!row) throw ValidationError(row_key + ": expected an array of entries");
      out.emplace_back();
      for (std::size_t j = 0; j < row->size(); ++j) {
        const std::string entry_key = row_key + "[" + std::to_string(j) + "]";
        const toml::node& entry = *row->get(j);
        if (const toml::array* pair = entry.as_array()) {
          if (pair->size() != 2) throw ValidationError(entry_key + ": expected [re, im]");
          out.back().emplace_back(as_number(*pair->get(0), entry_key + "[0]"),
                                  as_number(*pair->get(1), entry_key + "[1]"));
        } else {
          out.back().emplace_back(as_number(entry, entry_key), 0.0);
        }
      }
    }
    return out;
  }

  std::optional<Section> table(std::string_view key) {
    const toml::node* n = take(key);
    if (!n) return std::nullopt;
    const toml::table* t = n->as_table();
    if (!t) throw ValidationError(at(key) + ": expected a table");
    return Section(*t, at(key));
  }

  void finish() const {
    for (const auto& [k, v] : t_) {
      if (!seen_.count(std::string(k.str()))) throw ValidationError(at(k.str()) + ": unknown key");
    }
  }

  /// No keys besides the listed ones.
  bool only(std::initializer_list<std::string_view> keys) const {
    for (const auto& [k, v] : t_) {
      if (std::find(keys.begin(), keys.end(), k.str()) == keys.end()) return false;
    }
    return true;
  }

 private:
  const toml::node* take(std::string_view key) {
    seen_.insert(std::string(key));
    return t_.get(key);
  }

  static double as_number(const toml::node& n, const std::string& key) {
    if (n.is_integer()) return static_cast<double>(*n.value<std::int64_t>());
    if (n.is_floating_point()) return *n.value<double>();
    throw ValidationError(key + ": expected a number");
  }

  const toml::table& t_;
  std::string path_;
  std::set<std::string> seen_;
};

toml::table parse_toml(std::string_view text, const std::string& origin) {
  try {
    return toml::parse(text, origin);
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << origin << ":" << e.source().begin.line << ":" << e.source().begin.column << ": " << e.description();
    throw ValidationError(msg.str());
  }
}

double positive(const std::optional<double>& v, double fallback, const std::string& key) {
  if (!v) return fallback;
  if (!(*v > 0) || !std::isfinite(*v)) throw ValidationError(key + ": must be positive and finite");
  return *v;
}

int int_in(const std::optional<std::int64_t>& v, int fallback, std::int64_t lo, std::int64_t hi, const std::string& key) {
  if (!v) return fallback;
  if (*v < lo || *v > hi) {
    throw ValidationError(key + ": must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
  }
  return static_cast<int>(*v);
}

// energy,value rows; blank lines, '#' comments and a non-numeric header are skipped
Density table_from_csv(const fs::path& p, const std::string& key) {
  std::istringstream in(read_file(p, key));
  std::vector<double> e, v;
  std::string line;
  int row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line[0] == '#') continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream fields(line);
    double a, b;
    if (!(fields >> a >> b)) {
      if (e.empty()) continue;
      throw ValidationError(key + ": " + p.string() + " row " + std::to_string(row) + " is not 'energy,value'");
    }
    e.push_back(a);
    v.push_back(b);
  }
  return Density::table(std::move(e), std::move(v));
}

Density parse_band_body(Section& s, const fs::path& base) {
  const std::string kind = s.string("kind").value_or("gaussian");
  Density d = Density::zero();
  if (kind == "gaussian") {
    auto req = [&](std::string_view k) {
      const auto v = s.number(k);
      if (!v) throw ValidationError(s.at(k) + ": missing");
      return *v;
    };
    const double amplitude = req("amplitude"), center = req("center"), width = req("width");
    const double lo = req("lo"), hi = req("hi");
    d = Density::gaussian(amplitude, center, width, lo, hi);
  } else if (kind == "table") {
    const auto file = s.string("file");
    auto energy = s.numbers("energy");
    auto value = s.numbers("value");
    if (file && (energy || value)) throw ValidationError(s.at("file") + ": give either a file or inline arrays");
    if (file) {
      d = table_from_csv(base / *file, s.at("file"));
    } else {
      if (!energy || !value) throw ValidationError(s.at("energy") + ": table needs energy and value arrays");
      if (energy->size() != value->size()) throw ValidationError(s.at("value") + ": length differs from energy");
      d = Density::table(std::move(*energy), std::move(*value));
    }
  } else if (kind != "zero") {
    throw ValidationError(s.at("kind") + ": expected gaussian, table or zero");
  }
  s.finish();
  return d;
}

Density parse_band(Section s, const fs::path& base) {
  try {
    return parse_band_body(s, base);
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    if (msg.rfind(s.path(), 0) == 0) throw;
    throw ValidationError(s.path() + ": " + msg);
  }
}

SpectralModel parse_model(Section s, const fs::path& base) {
  if (auto preset = s.string("preset")) {
    if (!s.only({"preset"})) throw ValidationError(s.at("preset") + ": a preset excludes other keys");
    if (*preset != "m1") throw ValidationError(s.at("preset") + ": unknown preset '" + *preset + "'");
    return model_m1();
  }
  if (auto file = s.string("file")) {
    if (!s.only({"file"})) throw ValidationError(s.at("file") + ": a file reference excludes other keys");
    const fs::path p = base / *file;
    const toml::table t = parse_toml(read_file(p, s.at("file")), p.string());
    return parse_model(Section(t, s.at("file") + "(" + p.filename().string() + ")"), p.parent_path());
  }
  const auto beta = s.number("beta");
  if (!beta) throw ValidationError(s.at("beta") + ": missing");
  const double omega0 = s.number("omega0").value_or(0.0);
  const std::string thermal = s.string("thermal").value_or("h1");
  if (thermal != "h1" && thermal != "h1prime") throw ValidationError(s.at("thermal") + ": expected h1 or h1prime");
  Quadrature q;
  if (auto rel = s.number("rel_tol")) q.rel_tol = positive(rel, q.rel_tol, s.at("rel_tol"));
  Density bands[2] = {Density::zero(), Density::zero()};
  for (int eps = 0; eps < 2; ++eps) {
    const std::string key = "band" + std::to_string(eps);
    auto b = s.table(key);
    if (!b) throw ValidationError(s.at(key) + ": missing");
    bands[eps] = parse_band(*b, base);
  }
  s.finish();
  try {
    return SpectralModel(bands[0], bands[1], *beta, omega0, thermal == "h1" ? ThermalH::h1 : ThermalH::h1prime, q);
  } catch (const ValidationError& e) {
    throw ValidationError(s.path() + ": " + e.what());
  }
}

SystemModel parse_system(Section s, const fs::path& base) {
  if (auto preset = s.string("preset")) {
    if (!s.only({"preset"})) throw ValidationError(s.at("preset") + ": a preset excludes other keys");
    if (*preset != "m1") throw ValidationError(s.at("preset") + ": unknown preset '" + *preset + "'");
    return system_m1();
  }
  if (auto file = s.string("file")) {
    if (!s.only({"file"})) throw ValidationError(s.at("file") + ": a file reference excludes other keys");
    const fs::path p = base / *file;
    const toml::table t = parse_toml(read_file(p, s.at("file")), p.string());
    return parse_system(Section(t, s.at("file") + "(" + p.filename().string() + ")"), p.parent_path());
  }
  const auto re = s.matrix("d");
  if (!re) throw ValidationError(s.at("d") + ": missing");
  const auto im = s.matrix("d_imag");
  const int n = static_cast<int>(re->size());
  CMatrix d(n, n);
  for (int i = 0; i < n; ++i) {
    if (static_cast<int>((*re)[i].size()) != n) throw ValidationError(s.at("d") + ": must be square");
    if (im && (static_cast<int>(im->size()) != n || static_cast<int>((*im)[i].size()) != n)) {
      throw ValidationError(s.at("d_imag") + ": shape differs from d");
    }
    for (int j = 0; j < n; ++j) {
      if (im && (*im)[i][j].imag() != 0) throw ValidationError(s.at("d_imag") + ": entries must be real");
      d(i, j) = (*re)[i][j] + cplx(0, im ? (*im)[i][j].real() : 0.0);
    }
  }
  const auto levels = s.numbers("levels");
  s.finish();
  if (levels && levels->size() != 2) throw ValidationError(s.at("levels") + ": expected two level indices");
  try {
    if (!levels) return SystemModel(d);
    return SystemModel(d, {static_cast<int>((*levels)[0]), static_cast<int>((*levels)[1])});
  } catch (const ValidationError& e) {
    throw ValidationError(s.path() + ": " + e.what());
  }
}

}  // namespace

RunConfig parse_config(std::string_view text, const fs::path& base) {
  const toml::table root = parse_toml(text, "config");
  Section s(root, "");
  RunConfig c;
  c.hash = fnv1a(text);
  if (auto cmd = s.string("command")) {
    if (std::find(std::begin(kCommands), std::end(kCommands), *cmd) == std::end(kCommands)) {
      throw ValidationError("command: unknown command '" + *cmd + "'");
    }
    c.command = *cmd;
  }
  if (auto seed = s.integer("seed")) {
    if (*seed < 0) throw ValidationError("seed: must be non-negative");
    c.seed = static_cast<std::uint64_t>(*seed);
  }
  c.threads = int_in(s.integer("threads"), c.threads, 1, 256, "threads");

  auto model = s.table("model");
  if (!model) throw ValidationError("model: missing");
  c.model = parse_model(*model, base);
  auto system = s.table("system");
  if (!system) throw ValidationError("system: missing");
  c.system = parse_system(*system, base);

  if (auto t = s.table("tabulate")) {
    if (auto e = t->numbers("energies")) {
      for (double v : *e) {
        if (!std::isfinite(v)) throw ValidationError(t->at("energies") + ": must be finite");
      }
      c.energies = *e;
    }
    c.points = int_in(t->integer("points"), c.points, 1, 10000, t->at("points"));
    t->finish();
  }
  if (auto t = s.table("decay")) {
    c.t_max = positive(t->number("t_max"), c.t_max, t->at("t_max"));
    c.steps = int_in(t->integer("steps"), c.steps, 1, 100000, t->at("steps"));
    t->finish();
  }
  if (auto t = s.table("prelimit")) {
    if (auto l = t->numbers("lambdas")) {
      if (l->empty()) throw ValidationError(t->at("lambdas") + ": must not be empty");
      for (std::size_t i = 0; i < l->size(); ++i) {
        if (!((*l)[i] > 0)) throw ValidationError(t->at("lambdas") + ": must be positive");
        if (i > 0 && !((*l)[i] < (*l)[i - 1])) throw ValidationError(t->at("lambdas") + ": must be decreasing");
      }
      c.lambdas = *l;
    }
    t->finish();
  }
  if (auto t = s.table("scatter")) {
    c.grid_points = int_in(t->integer("points"), c.grid_points, 4, 2048, t->at("points"));
    if (c.grid_points % 2 != 0) throw ValidationError(t->at("points") + ": must be even");
    c.eta = positive(t->number("eta"), c.eta, t->at("eta"));
    c.horizon = positive(t->number("horizon"), c.horizon, t->at("horizon"));
    t->finish();
  }
  if (auto t = s.table("check")) {
    c.random_trials = int_in(t->integer("random_trials"), c.random_trials, 1, 100000, t->at("random_trials"));
    c.algebra_trials = int_in(t->integer("algebra_trials"), c.algebra_trials, 1, 100000, t->at("algebra_trials"));
    t->finish();
  }
  s.finish();
  return c;
}

RunConfig load_config(const fs::path& path) {
  if (!fs::exists(path)) throw ValidationError("config: no such file " + path.string());
  return parse_config(read_file(path, "config"), path.parent_path());
}

std::vector<double> tabulation_energies(const RunConfig& c) {
  if (!c.energies.empty()) return c.energies;
  std::vector<double> out;
  for (int eps = 0; eps < 2; ++eps) {
    const Density& band = c.model->rho(eps);
    if (band.empty()) continue;
    for (int k = 0; k < c.points; ++k) out.push_back(band.lo() + (k + 0.5) * (band.hi() - band.lo()) / c.points);
  }
  return out;
}

}  // namespace ldl

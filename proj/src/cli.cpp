#include "ldl/cli.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <unistd.h>

#include "ldl/checks.hpp"
#include "ldl/errors.hpp"
#include "ldl/golden_rule.hpp"
#include "ldl/noise_algebra.hpp"
#include "ldl/prelimit.hpp"
#include "ldl/scattering.hpp"

namespace ldl {

namespace {

namespace fs = std::filesystem;

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string quoted(const std::string& s) {
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

class Csv {
 public:
  Csv(const RunConfig& c, const std::vector<std::string>& extra_meta, const std::string& header) {
    out_ << "# meta: tool=" << kToolVersion << "\n";
    out_ << "# meta: command=" << c.command << "\n";
    out_ << "# meta: config_hash=fnv1a64:" << c.hash << "\n";
    out_ << "# meta: seed=" << c.seed << "\n";
    for (const auto& m : extra_meta) out_ << "# meta: " << m << "\n";
    out_ << header << "\n";
  }

  template <class... T>
  void row(const T&... fields) {
    bool first = true;
    ((out_ << (first ? "" : ",") << field(fields), first = false), ...);
    out_ << "\n";
  }

  void values(const std::vector<double>& v) {
    for (std::size_t i = 0; i < v.size(); ++i) out_ << (i ? "," : "") << num(v[i]);
    out_ << "\n";
  }

  std::string str() const { return out_.str(); }

 private:
  static std::string field(double v) { return num(v); }
  static std::string field(int v) { return std::to_string(v); }
  static std::string field(const std::string& v) { return v; }
  static std::string field(const char* v) { return v; }

  std::ostringstream out_;
};

ExitReport run_derive(const RunConfig& c) {
  ExitReport r;
  std::ostringstream text;
  text << "# meta: tool=" << kToolVersion << "\n# meta: command=derive\n# meta: config_hash=fnv1a64:" << c.hash
       << "\n# meta: seed=" << c.seed << "\n";
  const algebra::Expr integrand = normal_ordered_integrand();
  text << algebra::serialize(integrand) << "\n";
  r.files.push_back({"qsde.txt", text.str()});

  const QsdeCoefficients q = derive_qsde(*c.system, *c.model);
  Csv csv(c, {}, "energy,eps,eps2,row,col,re,im");
  for (double e : tabulation_energies(c)) {
    for (int a = 0; a < 2; ++a) {
      for (int b = 0; b < 2; ++b) {
        const CMatrix m = q.r(a, b, e);
        for (int i = 0; i < m.rows(); ++i) {
          for (int j = 0; j < m.cols(); ++j) csv.row(e, a, b, i, j, m(i, j).real(), m(i, j).imag());
        }
      }
    }
  }
  r.files.push_back({"coefficients.csv", csv.str()});
  r.summary = "derive: " + std::to_string(integrand.size()) + " integrand terms, coefficients at " +
              std::to_string(tabulation_energies(c).size()) + " energies\n";
  return r;
}

ExitReport run_gamma(const RunConfig& c) {
  ExitReport r;
  const SpectralModel& m = *c.model;
  Csv table(c, {}, "E,re_gamma0,im_gamma0,re_gamma1,im_gamma1,w0,w1");
  for (double e : tabulation_energies(c)) {
    const cplx g0 = gamma_eps(m, 0, e), g1 = gamma_eps(m, 1, e);
    table.row(e, g0.real(), g0.imag(), g1.real(), g1.imag(), weight_w(m, 0, e), weight_w(m, 1, e));
  }
  const CMatrix g = gamma_matrix(m, *c.system);
  const double lowest = check_damping(g);
  Csv damping(c, {"min_hermitian_eigenvalue=" + num(lowest)}, "row,col,re,im");
  for (int i = 0; i < g.rows(); ++i) {
    for (int j = 0; j < g.cols(); ++j) damping.row(i, j, g(i, j).real(), g(i, j).imag());
  }
  r.files.push_back({"gamma.csv", table.str()});
  r.files.push_back({"damping.csv", damping.str()});
  r.summary = "gamma: smallest eigenvalue of the Hermitian part " + num(lowest) + "\n";
  if (lowest < -1e-10) r.code = kExitTolerance;
  return r;
}

ExitReport run_decay(const RunConfig& c) {
  ExitReport r;
  const CMatrix g = gamma_matrix(*c.model, *c.system);
  std::vector<double> times;
  for (int i = 0; i <= c.steps; ++i) times.push_back(c.t_max * i / c.steps);
  const int n = static_cast<int>(g.rows());
  std::string header = "t,norm";
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const std::string ij = std::to_string(i) + std::to_string(j);
      header += ",re_U_" + ij + ",im_U_" + ij;
    }
  }
  Csv csv(c, {}, header);
  for (const auto& p : decay_curve(g, times)) {
    std::vector<double> values{p.t, p.norm};
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        values.push_back(p.u(i, j).real());
        values.push_back(p.u(i, j).imag());
      }
    }
    csv.values(values);
  }
  r.files.push_back({"decay.csv", csv.str()});
  r.summary = "decay: " + std::to_string(times.size()) + " times up to " + num(c.t_max) + "\n";
  return r;
}

ExitReport run_prelimit(const RunConfig& c) {
  ExitReport r;
  Csv csv(c, {}, "probe,lambda,value_re,value_im,limit_re,limit_im,error,flagged");
  std::ostringstream summary;
  bool ok = true;
  for (auto mode : {KernelMode::full, KernelMode::simplex}) {
    const std::string name = mode == KernelMode::full ? "full" : "simplex";
    const auto pts = kernel_limit_check(standard_pair(*c.model, mode), c.lambdas, mode);
    for (const auto& p : pts) {
      csv.row(name, p.lambda, p.value.real(), p.value.imag(), p.limit.real(), p.limit.imag(), p.error,
              p.flagged ? 1 : 0);
    }
    ok = ok && sweep_converges(pts) && pts.back().error <= 5e-2;
    summary << "prelimit " << name << ": final error " << num(pts.back().error) << "\n";
  }
  const TwoPointLabels labels = standard_two_point(*c.model);
  double prev = INFINITY;
  for (double lambda : c.lambdas) {
    const LimitPoint p = prelimit_two_point(*c.model, lambda, labels);
    const bool flagged = !(p.error < prev);
    prev = p.error;
    csv.row(std::string("two_point"), lambda, p.value.real(), p.value.imag(), p.limit.real(), p.limit.imag(),
            p.error, flagged ? 1 : 0);
  }
  summary << "prelimit two_point: final error " << num(prev) << "\n";
  r.files.push_back({"prelimit.csv", csv.str()});
  r.summary = summary.str();
  if (!ok) r.code = kExitTolerance;
  return r;
}

ExitReport run_scatter(const RunConfig& c) {
  ExitReport r;
  const GridSpace grid(*c.model, c.grid_points);
  MollerOptions opt;
  opt.eta = c.eta;
  opt.horizon = c.horizon;
  const CrossCheck x = cross_check(grid, *c.system, opt);
  const std::string dir = x.direction == Direction::plus ? "plus" : "minus";
  Csv csv(c,
          {"grid_points=" + std::to_string(c.grid_points), "direction=" + dir, "worst_dominant=" + num(x.worst),
           "worst_other_direction=" + num(x.worst_other), "eta_estimate=" + num(x.estimate),
           "intertwining=" + num(x.intertwining)},
          "band_a,band_b,u,v,spectral_re,spectral_im,dynamic_re,dynamic_im,rel,dominant");
  for (const auto& e : x.rows) {
    csv.row(e.band_a, e.band_b, e.u, e.v, e.spectral.real(), e.spectral.imag(), e.dynamic.real(), e.dynamic.imag(),
            e.rel, e.dominant ? 1 : 0);
  }
  r.files.push_back({"scatter.csv", csv.str()});
  r.summary = "scatter: direction " + dir + ", worst dominant deviation " + num(x.worst) + "\n";
  if (x.worst > 5e-2) r.code = kExitTolerance;
  return r;
}

ExitReport run_check(const RunConfig& c) {
  ExitReport r;
  SuiteOptions opt;
  opt.seed = c.seed;
  opt.threads = c.threads;
  opt.scatter_points = c.grid_points;
  opt.algebra_trials = c.algebra_trials;
  opt.random_trials = c.random_trials;
  const auto items = run_suite(*c.model, *c.system, opt);
  Csv csv(c, {}, "name,value,bound,passed,detail");
  std::ostringstream table;
  char line[160];
  std::snprintf(line, sizeof line, "%-20s %12s %12s  %s\n", "check", "value", "bound", "result");
  table << line;
  int passed = 0;
  for (const auto& it : items) {
    csv.row(it.name, it.value, it.bound, it.passed ? 1 : 0, quoted(it.detail));
    std::snprintf(line, sizeof line, "%-20s %12.3e %12.3e  %s\n", it.name.c_str(), it.value, it.bound,
                  it.passed ? "pass" : "FAIL");
    table << line;
    passed += it.passed;
  }
  table << passed << "/" << items.size() << " checks passed\n";
  r.files.push_back({"check.csv", csv.str()});
  r.summary = table.str();
  if (passed != static_cast<int>(items.size())) r.code = kExitTolerance;
  return r;
}

}  // namespace

ExitReport render(const RunConfig& c) {
  if (!c.model || !c.system) throw ValidationError("config: model and system are required");
  if (c.command == "derive") return run_derive(c);
  if (c.command == "gamma") return run_gamma(c);
  if (c.command == "decay") return run_decay(c);
  if (c.command == "prelimit") return run_prelimit(c);
  if (c.command == "scatter") return run_scatter(c);
  if (c.command == "check") return run_check(c);
  throw ValidationError("command: unknown command '" + c.command + "'");
}

void write_outputs(const fs::path& dir, const std::vector<OutputFile>& files) {
  fs::create_directories(dir);
  std::vector<std::pair<fs::path, fs::path>> staged;
  try {
    for (const auto& f : files) {
      const fs::path tmp = dir / ("." + f.name + ".tmp" + std::to_string(::getpid()));
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      out << f.content;
      out.close();
      staged.emplace_back(tmp, dir / f.name);
      if (!out) throw std::runtime_error("cannot write " + tmp.string());
    }
  } catch (...) {
    for (const auto& [tmp, final] : staged) fs::remove(tmp);
    throw;
  }
  for (const auto& [tmp, final] : staged) fs::rename(tmp, final);
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ValidationError*>(&e) || dynamic_cast<const DomainError*>(&e)) return kExitValidation;
  if (dynamic_cast<const ToleranceError*>(&e) || dynamic_cast<const SingularCoefficientError*>(&e)) {
    return kExitTolerance;
  }
  if (dynamic_cast<const ConvergenceError*>(&e)) return kExitConvergence;
  return kExitNumerical;
}

ExitReport execute(const RunConfig& c, const fs::path& out_dir) {
  ExitReport r;
  try {
    r = render(c);
    write_outputs(out_dir, r.files);
  } catch (const std::exception& e) {
    r.code = exit_code_for(e);
    r.summary += std::string(dynamic_cast<const ValidationError*>(&e) ? "validation error: " : "error: ") +
                 e.what() + "\n";
    r.files.clear();
  }
  return r;
}

int run_cli(int argc, char** argv) {
  CLI::App app{"Low-density-limit QSDE workbench"};
  std::string command;
  std::string config_path;
  std::string out_dir = ".";
  std::int64_t seed = -1;
  int threads = 0;
  app.add_option("command", command, "derive, gamma, decay, prelimit, scatter or check (overrides the config)")
      ->check(CLI::IsMember({"derive", "gamma", "decay", "prelimit", "scatter", "check"}));
  app.add_option("--config", config_path, "run configuration (TOML)")->required();
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--seed", seed, "seed for randomized checks (overrides the config)")->check(CLI::NonNegativeNumber);
  app.add_option("--threads", threads, "worker threads (overrides the config)")->check(CLI::Range(1, 256));
  app.set_version_flag("--version", kToolVersion);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  RunConfig c;
  try {
    c = load_config(config_path);
    if (!command.empty()) c.command = command;
    if (c.command.empty()) throw ValidationError("command: none given on the command line or in the config");
    if (seed >= 0) c.seed = static_cast<std::uint64_t>(seed);
    if (threads > 0) c.threads = threads;
  } catch (const std::exception& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return kExitValidation;
  }
  const ExitReport r = execute(c, out_dir);
  (r.files.empty() && r.code != kExitOk ? std::cerr : std::cout) << r.summary;
  return r.code;
}

}  // namespace ldl

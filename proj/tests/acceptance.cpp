// One line per acceptance criterion; exit status is the number of failures.
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>

#include "ldl/checks.hpp"
#include "ldl/spectral.hpp"
#include "oracles.hpp"

using namespace ldl;
namespace fs = std::filesystem;

namespace {

const fs::path kSource = LDL_SOURCE_DIR;
const std::string kTool = LDLQSDE_PATH;

int failures = 0;

void report(int id, const CheckItem& item, double seconds) {
  if (!item.passed) ++failures;
  std::printf("%s [%2d] %-20s value %-12.4g bound %-10.3g %6.1fs  %s\n", item.passed ? "PASS" : "FAIL", id,
              item.name.c_str(), item.value, item.bound, seconds, item.detail.c_str());
  std::fflush(stdout);
}

void run(int id, const std::function<CheckItem()>& f) {
  const auto t0 = std::chrono::steady_clock::now();
  CheckItem item;
  try {
    item = f();
  } catch (const std::exception& e) {
    item.passed = false;
    item.value = NAN;
    item.detail = std::string("error: ") + e.what();
  }
  report(id, item, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
}

CheckItem gamma_against_oracle() {
  const SpectralModel m = model_m1();
  double worst = 0;
  int n = 0;
  for (int eps = 0; eps < 2; ++eps) {
    const Density& band = m.rho(eps);
    const auto rho = [band](double e) { return band(e); };
    for (int k = 0; k < 10; ++k, ++n) {
      const double e = band.lo() + (k + 0.5) * (band.hi() - band.lo()) / 10.0;
      const cplx ref = oracle::gamma_limit(rho, band.lo(), band.hi(), e);
      worst = std::max(worst, std::abs(gamma_eps(m, eps, e) - ref) / std::abs(ref));
    }
  }
  return {"gamma_oracle", worst, 1e-6, worst <= 1e-6, std::to_string(n) + " energies"};
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    std::ifstream in(e.path(), std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    files[e.path().filename().string()] = s.str();
  }
  return files;
}

CheckItem determinism() {
  const fs::path root = fs::temp_directory_path() / "ldl_acceptance_determinism";
  fs::remove_all(root);
  std::map<std::string, std::string> runs[2];
  int codes[2];
  for (int i = 0; i < 2; ++i) {
    const fs::path dir = root / ("run" + std::to_string(i));
    fs::create_directories(dir);
    const std::string cmd = "\"" + kTool + "\" check --config \"" + (kSource / "tools" / "m1.toml").string() +
                            "\" --out \"" + dir.string() + "\" --seed 7 > \"" + (dir / "stdout.txt").string() +
                            "\" 2>&1";
    codes[i] = std::system(cmd.c_str());
    runs[i] = snapshot(dir);
  }
  int differing = 0;
  for (const auto& [name, content] : runs[0]) {
    auto it = runs[1].find(name);
    if (it == runs[1].end() || it->second != content) ++differing;
  }
  if (runs[0].size() != runs[1].size()) ++differing;
  const bool ok = differing == 0 && codes[0] == 0 && codes[1] == 0 && runs[0].count("check.csv") == 1;
  return {"determinism", static_cast<double>(differing), 0, ok,
          std::to_string(runs[0].size()) + " files compared, exit codes " + std::to_string(codes[0]) + "/" +
              std::to_string(codes[1])};
}

}  // namespace

int main() {
  const SpectralModel m = model_m1();
  const SystemModel s = system_m1();
  const std::uint64_t seed = 7;

  run(1, [&] { return check_algebra(seed, 200); });
  run(2, [&] { return check_fixed_points(seed + 1, 100, 5); });
  run(3, [&] { return check_collision_identity(seed + 2, 100, 5); });
  run(4, gamma_against_oracle);
  run(5, [&] { return check_damping_suite(m, s, seed + 3, 50); });
  run(6, [&] { return check_decay(m, s, 10.0); });
  run(7, [&] { return check_prelimit(m); });
  run(8, [&] { return check_scattering(m, s, 128); });
  run(9, [&] { return check_normalization(m, s, 10); });
  run(10, determinism);

  std::printf("%d/10 criteria passed\n", 10 - failures);
  return failures;
}

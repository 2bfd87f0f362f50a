// Runs the full battery once, then the CLI battery twice, and prints one line per criterion.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "cli.hpp"
#include "tilt/battery.hpp"

namespace fs = std::filesystem;

namespace {

// Wall-clock budget per criterion, seconds. Criterion 5 shares the sandwich run with 4.
const std::map<int, double> kBudget{{1, 1},   {2, 120}, {3, 30}, {4, 180}, {5, 180},
                                    {6, 120}, {7, 60},  {8, 120}, {9, 120}};

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void line(bool ok, int id, const std::string& name, const std::string& detail) {
  std::printf("[%s] criterion %2d  %-34s %s\n", ok ? "PASS" : "FAIL", id, name.c_str(), detail.c_str());
  std::fflush(stdout);
}

}  // namespace

int main() {
  bool all = true;
  const tilt::BatteryConfig config;
  tilt::run_battery(config, [&](const tilt::CriterionResult& r) {
    const double budget = kBudget.at(r.id);
    const bool in_time = r.seconds < budget;
    const bool ok = r.passed && in_time;
    char detail[160];
    std::snprintf(detail, sizeof detail, "checks %s, %.3f s of %.0f s budget", r.passed ? "ok" : "FAILED", r.seconds,
                  budget);
    line(ok, r.id, r.name, detail);
    if (!r.passed) std::printf("%s\n", r.summary.dump(2).c_str());
    all = all && ok;
  });

  const fs::path dir = fs::temp_directory_path() / "tilt_acceptance";
  fs::create_directories(dir);
  const auto out = (dir / "battery.json").string();
  const std::vector<std::string> args{"battery", "--seed", "7", "--out", out};
  const int first_code = tilt::cli::run(args);
  const auto first = slurp(out);
  const int second_code = tilt::cli::run(args);
  const auto second = slurp(out);
  const bool same = !first.empty() && first == second;
  const bool ok = same && first_code == tilt::cli::kExitOk && second_code == tilt::cli::kExitOk;
  line(ok, 10, "Determinism",
       (same ? "reports byte-identical (" + std::to_string(first.size()) + " bytes)" : std::string("reports differ")) +
           ", exit codes " + std::to_string(first_code) + "/" + std::to_string(second_code));
  all = all && ok;

  std::printf("%s\n", all ? "ALL CRITERIA PASSED" : "SOME CRITERIA FAILED");
  return all ? 0 : 1;
}

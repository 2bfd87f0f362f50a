#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "tilt/potentials.hpp"
#include "tilt/report.hpp"
#include "tilt/rng.hpp"

using namespace tilt;
namespace fs = std::filesystem;

namespace {

fs::path scratch() {
  const auto dir = fs::temp_directory_path() / "tilt_cli_test";
  fs::create_directories(dir);
  return dir;
}

std::string path_of(const std::string& name) { return (scratch() / name).string(); }

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Json run_json(std::vector<std::string> args, int expect_code = 0) {
  const auto out = path_of("report.json");
  fs::remove(out);
  args.push_back("--out");
  args.push_back(out);
  CHECK(cli::run(args) == expect_code);
  return Json::parse(slurp(out));
}

std::string write_couplings(int n, double scale, const std::string& name) {
  CounterRng rng(1, StreamTag::generic, 0);
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < i; ++j) J(i, j) = J(j, i) = scale * rng.normal();
  const auto p = path_of(name);
  write_matrix_market(p, J);
  return p;
}

}  // namespace

TEST_CASE("usage errors exit with 1") {
  CHECK(cli::run({}) == cli::kExitUsage);
  CHECK(cli::run({"no-such-command"}) == cli::kExitUsage);
  CHECK(cli::run({"width", "--bogus", "1"}) == cli::kExitUsage);
  CHECK(cli::run({"width", "--mode", "sideways", "--random-hs", "1", "--n", "3"}) == cli::kExitUsage);
  CHECK(cli::run({"width", "--ising", "/nonexistent.mtx"}) == cli::kExitUsage);
  CHECK(cli::run({"transport-check"}) == cli::kExitUsage);  // --nu is required
  CHECK(cli::run({"--help"}) == cli::kExitOk);
}

TEST_CASE("width of zero couplings is zero") {
  const auto J = write_couplings(4, 0.0, "zero.mtx");
  const auto j = run_json({"width", "--ising", J, "--mode", "exact"});
  CHECK(j["result"]["mean"].get<double>() == 0.0);
  CHECK(j["command"] == "width");
}

TEST_CASE("meanfield report on an Ising file") {
  const auto J = write_couplings(12, 0.15, "J.mtx");
  const auto j = run_json({"meanfield", "--ising", J, "--n", "12", "--seed", "7"});
  CHECK(j["result"]["gap"].get<double>() >= 0.0);
  CHECK(j["seed"].get<std::uint64_t>() == 7);
  CHECK(j["config"]["seed"] == "7");
  CHECK(!j["version"].get<std::string>().empty());
  CHECK(!j.contains("runtime_seconds"));
  CHECK(cli::run({"meanfield", "--ising", J, "--n", "11"}) == cli::kExitUsage);
}

TEST_CASE("transport check on a product measure saturates") {
  const auto j = run_json({"transport-check", "--p", "0.5", "--nu", "product:0.4,-0.2", "--grid", "2000"});
  const double lhs = j["result"]["lhs"].get<double>(), rhs = j["result"]["rhs"].get<double>();
  CHECK(std::abs(lhs - rhs) <= 2e-3);
  CHECK(j["result"]["holds"].get<bool>());
}

TEST_CASE("inequality failures exit with 2") {
  const auto V = path_of("V.csv");
  std::ofstream(V) << "1,0\n0,1\n-1,0\n0,-1\n";
  run_json({"strongint", "--vectors", V}, cli::kExitOk);
  const auto j = run_json({"strongint", "--vectors", V, "--ratio-cap", "0.01"}, cli::kExitViolation);
  CHECK(!j["result"]["holds"].get<bool>());
  CHECK(j["violated"].get<bool>());
}

TEST_CASE("nld exits 0 when the gate fails") {
  // b(V) of a strongly coupled Ising model far exceeds delta, so nothing is asserted.
  const auto j = run_json({"nld", "--random-hs", "2", "--n", "4", "--t", "1", "--delta", "0.01"});
  CHECK(!j["result"]["asserted"].get<bool>());
  CHECK(j["result"]["gate_failed"].get<bool>());
}

TEST_CASE("config file: flat keys, flags override, unknown keys rejected") {
  const auto cfg = path_of("c.toml");
  std::ofstream(cfg) << "grid = 300\np = 0.3\n";
  auto j = run_json({"transport-check", "--nu", "probs:0.1,0.2,0.3,0.4", "--config", cfg, "--p", "0.7"});
  CHECK(j["config"]["grid"] == "300");
  CHECK(j["config"]["p"] == "0.7");
  CHECK(j["result"]["details"]["grid"].get<int>() == 300);

  std::ofstream(cfg) << "gridd = 300\n";
  CHECK(cli::run({"transport-check", "--nu", "probs:0.1,0.2,0.3,0.4", "--config", cfg}) == cli::kExitUsage);
  std::ofstream(cfg) << "[transport]\ngrid = 300\n";
  CHECK(cli::run({"transport-check", "--nu", "probs:0.1,0.2,0.3,0.4", "--config", cfg}) == cli::kExitUsage);
  CHECK(cli::run({"transport-check", "--nu", "probs:0.1,0.2,0.3,0.4", "--config", path_of("missing.toml")}) ==
        cli::kExitUsage);
}

TEST_CASE("reports are byte-identical across runs; timing is opt-in") {
  const auto a = path_of("a.json"), b = path_of("b.json");
  const std::vector<std::string> base{"ising-gap", "--n", "8", "--points", "4", "--seed", "11"};
  auto with_out = [&](const std::string& out) {
    auto v = base;
    v.insert(v.end(), {"--out", out});
    return v;
  };
  CHECK(cli::run(with_out(a)) == 0);
  const auto first = slurp(a);
  CHECK(cli::run(with_out(a)) == 0);
  CHECK(first == slurp(a));
  auto timed = with_out(b);
  timed.push_back("--timing");
  CHECK(cli::run(timed) == 0);
  CHECK(Json::parse(slurp(b)).contains("runtime_seconds"));
}

TEST_CASE("curves are written as CSV and SVG") {
  const auto csv = path_of("gap.csv"), svg = path_of("gap.svg");
  fs::remove(csv);
  fs::remove(svg);
  const auto j = run_json({"ising-gap", "--n", "6", "--points", "3", "--csv", csv, "--svg", svg});
  CHECK(j["result"]["curve"].size() == 3);
  const auto text = slurp(csv);
  CHECK(text.rfind("hs_norm,gap,width,bound\n", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 4);
  CHECK(slurp(svg).find("<svg") != std::string::npos);
}

TEST_CASE("every subcommand runs on a small input") {
  const auto V1 = path_of("V1.csv"), a = path_of("a.csv");
  std::ofstream(V1) << "0.5\n-1\n";
  std::ofstream(a) << "1\n0.5\n0.25\n";
  CHECK(run_json({"free-energy", "--linear", a})["result"]["n"] == 3);
  CHECK(run_json({"intexpo", "--vectors", V1})["result"]["method"] == "quadrature");
  CHECK(run_json({"intexpo", "--vectors", V1, "--law", "gaussian"})["result"]["holds"].get<bool>());
  CHECK(run_json({"exp-transport", "--lambda", "2"})["result"]["holds"].get<bool>());
  CHECK(run_json({"exp-transport", "--gamma-shape", "2", "--atoms", "200"})["result"]["holds"].get<bool>());
  CHECK(run_json({"logsob", "--random-hs", "0.8", "--n", "6"})["result"]["holds"].get<bool>());
  CHECK(run_json({"nld", "--linear", a, "--t", "1.2", "--delta", "0.1"})["result"]["holds"].get<bool>());
}

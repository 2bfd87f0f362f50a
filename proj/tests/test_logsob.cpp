#include <doctest.h>

#include <cmath>

#include "tilt/core.hpp"
#include "tilt/logsob.hpp"
#include "tilt/rng.hpp"

using namespace tilt;

namespace {

double binary_rate(double y) {
  double v = 0;
  if (y > -1) v += 0.5 * (1 + y) * std::log(1 + y);
  if (y < 1) v += 0.5 * (1 - y) * std::log(1 - y);
  return v;
}

struct Brute {
  double H = 0, I = 0, half = 0;
};

// Direct sums over the cube for nu = e^f mu / Z, mu uniform.
Brute brute(const std::vector<double>& f, int n) {
  const std::size_t N = f.size();
  double z = 0;
  for (double v : f) z += std::exp(v) / N;
  Brute b;
  for (std::size_t s = 0; s < N; ++s) {
    const double w = std::exp(f[s]) / z / N;
    b.H += w * (f[s] - std::log(z));
    for (int i = 0; i < n; ++i) {
      const std::size_t up = s | (std::size_t{1} << i), down = s & ~(std::size_t{1} << i);
      const double g = 0.5 * (f[up] - f[down]);
      b.I += w * binary_rate(std::tanh(g));
      b.half += w * 0.5 * g * g;
    }
  }
  return b;
}

std::vector<double> random_table(int n, double scale, std::uint64_t seed) {
  CounterRng rng(seed, StreamTag::generic, 0);
  std::vector<double> t(std::size_t{1} << n);
  for (auto& v : t) v = scale * rng.normal();
  return t;
}

}  // namespace

TEST_CASE("tilts saturate the log-Sobolev inequality") {
  const std::vector<double> a{0.5, -1.2, 2.0, 0.1};
  const auto g = GibbsOnCube::tilt(a);
  double H = 0;
  for (double ai : a) H += ai * std::tanh(ai) - std::log(std::cosh(ai));
  const auto r = check_logsob_pair(g);
  CHECK(r.details["relative_entropy"].get<double>() == doctest::Approx(H).epsilon(1e-12));
  CHECK(logsob_functional(g) == doctest::Approx(H).epsilon(1e-12));
  CHECK(r.holds);
}

TEST_CASE("functionals against brute-force sums") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const int n = 6;
    const auto table = random_table(n, 1.0, seed);
    const GibbsOnCube g(n, table);
    const auto b = brute(table, n);
    CHECK(logsob_functional(g) == doctest::Approx(b.I).epsilon(1e-12));
    CHECK(half_gradient_energy(g) == doctest::Approx(b.half).epsilon(1e-12));
    CHECK(b.H <= b.I + 1e-12);
    CHECK(b.I <= b.half + 1e-12);
    CHECK(integration_identity_residual(g) <= 1e-10);
  }
}

TEST_CASE("normalization removes constant shifts") {
  auto table = random_table(4, 0.5, 9);
  const GibbsOnCube g(4, table);
  for (auto& v : table) v += 3.0;
  const GibbsOnCube shifted(4, table);
  CHECK(g.normalized());
  CHECK(logsob_functional(shifted) == doctest::Approx(logsob_functional(g)).epsilon(1e-13));
  double mass = 0;
  for (double v : g.nu().probs()) mass += v;
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("reverse inequality and chain on random potentials") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const int n = 3 + static_cast<int>(seed % 6);
    const GibbsOnCube g(n, random_table(n, 0.3 + 0.3 * seed, 100 + seed));
    const auto r = check_logsob_pair(g);
    CHECK(r.holds);
    CHECK(r.details["readings_coincide"].get<bool>());
    CHECK(r.details["improved_inequality_holds"].get<bool>());
  }
}

TEST_CASE("large gradients stay finite") {
  std::vector<double> table(4, 0.0);
  table[3] = 200.0;
  const GibbsOnCube g(2, table);
  CHECK(std::isfinite(logsob_functional(g)));
  CHECK(integration_identity_residual(g) <= 1e-8);
}

#include <doctest.h>

#include <cmath>

#include "tilt/core.hpp"
#include "tilt/free_energy.hpp"
#include "tilt/rng.hpp"
#include "tilt/width.hpp"

using namespace tilt;

namespace {

double brute_width(const std::vector<std::vector<double>>& V) {
  const int n = static_cast<int>(V[0].size());
  double total = 0;
  for (std::uint64_t s = 0; s < (std::uint64_t{1} << n); ++s) {
    double best = -HUGE_VAL;
    for (const auto& xi : V) {
      double dot = 0;
      for (int i = 0; i < n; ++i) dot += xi[i] * spin(s, i);
      best = std::max(best, dot);
    }
    total += best;
  }
  return total / std::ldexp(1.0, n);
}

std::vector<std::vector<double>> random_cloud(int n, int k, std::uint64_t seed) {
  CounterRng rng(seed, StreamTag::generic, 0);
  std::vector<std::vector<double>> V(k, std::vector<double>(n));
  for (auto& v : V)
    for (auto& x : v) x = rng.normal();
  return V;
}

}  // namespace

TEST_CASE("widths of simple sets") {
  CHECK(rademacher_width_finite({{1.0, -2.0, 3.0}}, WidthMode::exact, 0, 0).mean == doctest::Approx(0.0));
  CHECK(rademacher_width_finite({{1.0}, {-1.0}}, WidthMode::exact, 0, 0).mean == doctest::Approx(1.0));
  std::vector<std::vector<double>> cross;
  for (int i = 0; i < 4; ++i)
    for (double s : {-1.0, 1.0}) {
      std::vector<double> e(4, 0.0);
      e[i] = s;
      cross.push_back(e);
    }
  CHECK(rademacher_width_finite(cross, WidthMode::exact, 0, 0).mean == doctest::Approx(1.0));
  std::vector<std::vector<double>> cube;
  for (std::uint64_t s = 0; s < 8; ++s) cube.push_back(spins_of(s, 3));
  CHECK(rademacher_width_finite(cube, WidthMode::exact, 0, 0).mean == doctest::Approx(3.0));
}

TEST_CASE("exact width matches brute force on random clouds") {
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const auto V = random_cloud(6, 9, seed);
    CHECK(rademacher_width_finite(V, WidthMode::exact, 0, 0).mean == doctest::Approx(brute_width(V)).epsilon(1e-12));
  }
}

TEST_CASE("Monte Carlo width covers the exact value and is seed-deterministic") {
  const auto V = random_cloud(10, 12, 5);
  const double exact = brute_width(V);
  const auto mc = rademacher_width_finite(V, WidthMode::monte_carlo, 200000, 3);
  CHECK(mc.ci_half_width > 0);
  CHECK(std::abs(mc.mean - exact) <= 2 * mc.ci_half_width);
  const auto again = rademacher_width_finite(V, WidthMode::monte_carlo, 200000, 3);
  CHECK(again.mean == mc.mean);
  CHECK(mc.method == WidthMethod::monte_carlo);
}

TEST_CASE("Gaussian width of +-e_1 is E|Gamma|") {
  const auto g = gaussian_width_finite({{1.0}, {-1.0}}, 400000, 11);
  CHECK(std::abs(g.mean - std::sqrt(2.0 / M_PI)) <= 2 * g.ci_half_width);
}

TEST_CASE("Ising width is 2 E||J eps||_1 and ignores the field") {
  const int n = 7;
  CounterRng rng(1, StreamTag::generic, 0);
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < i; ++j) J(i, j) = J(j, i) = rng.normal();
  double brute = 0;
  for (std::uint64_t s = 0; s < 128; ++s) {
    Eigen::VectorXd eps(n);
    for (int i = 0; i < n; ++i) eps[i] = spin(s, i);
    brute += 2 * (J * eps).cwiseAbs().sum() / 128;
  }
  const auto w0 = rademacher_width_ising(J, Eigen::VectorXd::Zero(n), WidthMode::exact, 0, 0);
  const auto wh = rademacher_width_ising(J, Eigen::VectorXd::Ones(n), WidthMode::exact, 0, 0);
  CHECK(w0.mean == doctest::Approx(brute).epsilon(1e-12));
  CHECK(wh.mean == w0.mean);
  CHECK(w0.mean <= w0.hs_bound * 2 + 1e-12);
  CHECK(w0.hs_bound == doctest::Approx(std::sqrt(double(n)) * J.norm()));
}

TEST_CASE("potential width") {
  // Linear potentials have a singleton gradient set.
  CHECK(potential_width(Potential::linear(Eigen::Vector3d(1, 2, 3)), WidthMode::exact, 0, 0).mean == 0.0);
  // f = x1 x2 x3: the gradient set is {(y2 y3, y1 y3, y1 y2)}; at vertices the
  // sup of <grad, eps> is E max over vertex gradients, computed by brute force.
  const auto f = Potential::multilinear(3, {{0b111, 1.0}});
  std::vector<std::vector<double>> grads;
  for (std::uint64_t s = 0; s < 8; ++s) grads.push_back(f.gradient(spins_of(s, 3)));
  CHECK(potential_width(f, WidthMode::exact, 0, 0).mean == doctest::Approx(brute_width(grads)).epsilon(1e-12));
}

TEST_CASE("exact mode refuses large dimensions") {
  CHECK_THROWS(rademacher_width_finite({std::vector<double>(30, 1.0)}, WidthMode::exact, 0, 0));
}

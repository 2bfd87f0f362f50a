#include <doctest.h>

#include <cmath>

#include "tilt/core.hpp"
#include "tilt/integrability.hpp"
#include "tilt/rng.hpp"

using namespace tilt;

namespace {

double lambda_p(double t, double p) { return std::log(p * std::exp(t) + (1 - p) * std::exp(-t)); }

// log E exp(sup_xi <xi, X> - sum Lambda_p(xi_i)) by direct enumeration.
double brute_log_mgf(const std::vector<std::vector<double>>& V, double p) {
  const int n = static_cast<int>(V[0].size());
  double total = 0;
  for (std::uint64_t s = 0; s < (std::uint64_t{1} << n); ++s) {
    double w = 1, best = -HUGE_VAL;
    for (int i = 0; i < n; ++i) w *= spin(s, i) > 0 ? p : 1 - p;
    for (const auto& xi : V) {
      double v = 0;
      for (int i = 0; i < n; ++i) v += xi[i] * spin(s, i) - lambda_p(xi[i], p);
      best = std::max(best, v);
    }
    total += w * std::exp(best);
  }
  return std::log(total);
}

std::vector<std::vector<double>> cloud(int n, int k, double scale, std::uint64_t seed) {
  CounterRng rng(seed, StreamTag::generic, 0);
  std::vector<std::vector<double>> V(k, std::vector<double>(n));
  for (auto& v : V)
    for (auto& x : v) x = scale * rng.normal();
  return V;
}

}  // namespace

TEST_CASE("log-Laplace transforms of the three laws") {
  const std::vector<double> xi{0.3, -0.5};
  CHECK(log_laplace(Law::bernoulli, BernoulliParam(0.3), xi) == doctest::Approx(lambda_p(0.3, 0.3) + lambda_p(-0.5, 0.3)));
  CHECK(log_laplace(Law::exponential, BernoulliParam{}, xi) == doctest::Approx(-std::log(0.7) - std::log(1.5)));
  CHECK(log_laplace(Law::gaussian, BernoulliParam{}, xi) == doctest::Approx(0.5 * (0.09 + 0.25)));
}

TEST_CASE("exact sup-process log-mgf against enumeration") {
  for (double p : {0.5, 0.2}) {
    const auto V = cloud(5, 7, 0.8, 1);
    SupProcessSpec spec{V, Law::bernoulli, BernoulliParam(p), EvalMode::exact, 0, 0};
    CHECK(sup_process_log_mgf(spec).value == doctest::Approx(brute_log_mgf(V, p)).epsilon(1e-12));
  }
}

TEST_CASE("singletons give a zero log-mgf") {
  SupProcessSpec spec{{{0.7, -1.3, 2.0}}, Law::bernoulli, BernoulliParam(0.4), EvalMode::exact, 0, 0};
  CHECK(std::abs(sup_process_log_mgf(spec).value) <= 1e-12);
}

TEST_CASE("Monte Carlo log-mgf covers the exact value") {
  const auto V = cloud(8, 10, 0.5, 2);
  SupProcessSpec spec{V, Law::bernoulli, BernoulliParam(0.5), EvalMode::monte_carlo, 400000, 5};
  const auto mc = sup_process_log_mgf(spec);
  CHECK(std::abs(mc.value - brute_log_mgf(V, 0.5)) <= 2 * mc.ci_half_width);
  CHECK(mc.reliable);
  CHECK(sup_process_log_mgf(spec).value == mc.value);
}

TEST_CASE("strong integrability under the uniform law") {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const auto V = cloud(6, 5, 1.0 + seed, 10 + seed);
    const auto r = check_strongintB(V, BernoulliParam(0.5), {});
    CHECK(r.holds);
    CHECK(r.lhs >= -1e-12);
    CHECK(r.lhs <= r.rhs);
  }
}

TEST_CASE("one-dimensional exponential integrability against closed forms") {
  // V = {a, b}, a < b: (1-a)e^{ax} dominates on [0, x*], x* = log((1-b)/(1-a)) / (a-b).
  const double a = -1.0, b = 0.5;
  const double xs = std::log((1 - b) / (1 - a)) / (a - b);
  const double lhs = std::log(1 - std::exp(-(1 - a) * xs) + std::exp(-(1 - b) * xs));
  // max(c_a, c_b)(X - 1) with c = -log(1 - xi) = +-log 2: log 2 * E|X - 1| = log 2 * 2/e.
  const double rhs = std::log(2.0) * 2 / std::exp(1.0);
  const auto r = check_intexpo_1d({0.5, -1.0});
  CHECK(r.lhs == doctest::Approx(lhs).epsilon(1e-9));
  CHECK(r.rhs == doctest::Approx(rhs).epsilon(1e-9));
  CHECK(r.holds);
  CHECK(std::abs(check_intexpo_1d({0.3}).lhs) <= 1e-9);
}

TEST_CASE("one-dimensional Gaussian baseline") {
  // sup over {1,-1} of xi X - 1/2 is |X| - 1/2: log E = log(2 Phi(1)); the width is E|X|.
  const auto r = check_strongG_1d({1.0, -1.0});
  CHECK(r.lhs == doctest::Approx(std::log(std::erfc(-1 / std::sqrt(2.0)))).epsilon(1e-9));
  CHECK(r.rhs == doctest::Approx(std::sqrt(2 / M_PI)).epsilon(1e-9));
  CHECK(r.holds);
}

TEST_CASE("Monte Carlo exponential integrability") {
  CounterRng rng(3, StreamTag::generic, 0);
  std::vector<std::vector<double>> V(10, std::vector<double>(3));
  for (auto& v : V)
    for (auto& x : v) x = -1 + 1.8 * rng.uniform();
  const auto r = check_intexpo(V, 200000, 4);
  CHECK(r.holds);
  CHECK(r.tolerance > 0);
  CHECK_THROWS(check_intexpo({{1.2, 0.0}}, 1000, 1));
}

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "tilt/core.hpp"
#include "tilt/network_simplex.hpp"
#include "tilt/rng.hpp"
#include "tilt/transport.hpp"

using namespace tilt;

namespace {

double lambda_p(double t, double p) { return std::log(p * std::exp(t) + (1 - p) * std::exp(-t)); }

// Differential entropy of Gamma(k, theta) by quadrature-free formula; digamma by a central difference.
double gamma_entropy_vs_exponential(double k, double theta) {
  const double h = 1e-5;
  const double digamma = (std::lgamma(k + h) - std::lgamma(k - h)) / (2 * h);
  const double diff_entropy = k + std::log(theta) + std::lgamma(k) + (1 - k) * digamma;
  return -diff_entropy + k * theta;  // int g log g - int g log e^{-x}
}

}  // namespace

TEST_CASE("w_p cost on one coordinate") {
  const BernoulliParam p(0.3);  // h0 = -0.4
  CHECK(w_p_cost(1, 0.5, p).value() == doctest::Approx(2 * std::abs(std::atanh(0.5) - p.tilt0())));
  CHECK(w_p_cost(-1, 0.5, p).value() == 0.0);
  CHECK(w_p_cost(-1, -0.9, p).value() == doctest::Approx(2 * std::abs(std::atanh(-0.9) - p.tilt0())));
  CHECK(w_p_cost(1, -0.9, p).value() == 0.0);
  CHECK(w_p_cost(1, 1.0, p).is_pos_inf());
  CHECK_THROWS(w_p_cost(0, 0.1, p));
  CHECK_THROWS(w_p_cost(1, 1.5, p));
}

TEST_CASE("dual mean matches the log-Laplace transform") {
  for (double p : {0.05, 0.3, 0.5, 0.95})
    for (double t : {-5.0, -1.0, 0.0, 0.7, 5.0}) {
      CHECK(std::abs(dual_Yt_mean(t, BernoulliParam(p)) - lambda_p(t, p)) <= 1e-10);
      CHECK(std::abs(dual_Yt_mean_quadrature(t, BernoulliParam(p)) - lambda_p(t, p)) <= 1e-10);
    }
}

TEST_CASE("explicit coupling saturates the rate function") {
  for (double p : {0.2, 0.5, 0.7})
    for (double h : {-0.95, -0.3, 0.0, 0.6, 0.99}) {
      const BernoulliParam bp(p);
      CHECK(explicit_coupling_cost(h, bp) == doctest::Approx(rate_Ip(h, bp).value()).epsilon(1e-12));
      CHECK(std::abs(explicit_coupling_cost_quadrature(h, bp) - rate_Ip(h, bp).value()) <= 1e-9);
    }
}

TEST_CASE("network simplex solves assignment problems exactly") {
  const int k = 6;
  CounterRng rng(3, StreamTag::generic, 0);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<double> cost(k * k);
    for (auto& c : cost) c = rng.uniform();
    std::vector<int> perm(k);
    std::iota(perm.begin(), perm.end(), 0);
    double best = HUGE_VAL;
    do {
      double s = 0;
      for (int i = 0; i < k; ++i) s += cost[i * k + perm[i]];
      best = std::min(best, s / k);
    } while (std::next_permutation(perm.begin(), perm.end()));
    const std::vector<double> w(k, 1.0 / k);
    const auto r = network_simplex(w, w, cost);
    CHECK(r.primal == doctest::Approx(best).epsilon(1e-12));
    CHECK(r.dual == doctest::Approx(best).epsilon(1e-12));
    CHECK(r.cs_residual < 1e-12);
  }
}

TEST_CASE("transport plans are feasible with zero duality gap") {
  CounterRng rng(4, StreamTag::generic, 0);
  TransportProblem t;
  t.kind = CostKind::matrix;
  const int a = 7, b = 5;
  t.source_weights.resize(a);
  t.target_weights.resize(b);
  for (auto& v : t.source_weights) v = rng.exponential();
  for (auto& v : t.target_weights) v = rng.exponential();
  for (auto* w : {&t.source_weights, &t.target_weights}) {
    const double s = std::accumulate(w->begin(), w->end(), 0.0);
    for (auto& v : *w) v /= s;
  }
  t.cost.resize(a * b);
  for (auto& c : t.cost) c = rng.uniform() * 3;
  t.cost[2] = HUGE_VAL;  // a forbidden arc
  const auto plan = solve_ot(t);
  CHECK(std::abs(plan.duality_gap) < 1e-12);
  CHECK(plan.marginal_error < 1e-12);
  for (const auto& e : plan.entries) CHECK(!(e.source == 0 && e.target == 2));

  TransportProblem bad = t;
  std::fill(bad.cost.begin(), bad.cost.begin() + b, HUGE_VAL);
  CHECK_THROWS_AS(solve_ot(bad), InfeasibleTransport);

  const auto round = transport_problem_from_json(to_json(t));
  CHECK(solve_ot(round).primal == doctest::Approx(plan.primal).epsilon(1e-14));
}

TEST_CASE("structured grid solver agrees with the network simplex") {
  const BernoulliParam p(0.3);
  for (const auto& w : std::vector<std::vector<double>>{{0.1, 0.2, 0.3, 0.4}, {0.6, 0.05, 0.05, 0.3}}) {
    const DenseDistribution nu(2, w);
    const int m = 80;  // large enough to take the structured path
    const auto grid = solve_w_p_grid(nu, p, m);
    const auto simplex = solve_ot(w_p_grid_problem(nu, p, m));
    CHECK(grid.primal == doctest::Approx(simplex.primal).epsilon(1e-9));
    CHECK(grid.dual <= simplex.primal + 1e-12);
    CHECK(std::abs(grid.duality_gap) < 1e-9);
    CHECK(grid.marginal_error < 1e-12);
  }
}

TEST_CASE("Bernoulli transport: product measures saturate, others stay below") {
  const BernoulliParam p(0.5);
  const auto prod = ProductMeasure({0.4, -0.2}, p).materialize();
  const auto r = check_transpo_bernoulli(prod, p, {});
  CHECK(r.holds);
  CHECK(std::abs(r.lhs - r.rhs) <= 2e-3);
  CHECK(is_product(prod));
  const DenseDistribution corr(2, {0.4, 0.1, 0.1, 0.4});
  CHECK(!is_product(corr));
  const auto rc = check_transpo_bernoulli(corr, p, {});
  CHECK(rc.holds);
  CHECK(rc.lhs <= rc.rhs + 2e-3);
  TranspoConfig analytic;
  analytic.mode = TranspoMode::product_analytic;
  const auto ra = check_transpo_bernoulli(prod, p, analytic);
  CHECK(ra.lhs == doctest::Approx(ra.rhs).epsilon(1e-12));
  CHECK_THROWS(check_transpo_bernoulli(corr, p, analytic));
}

TEST_CASE("exponential transport") {
  for (double lambda : {0.25, 0.5, 1.0, 2.0, 4.0}) {
    const double expect = lambda - 1 - std::log(lambda);
    const auto law = exponential_tilt_law(lambda);
    CHECK(std::abs(monotone_exp_cost(law) - expect) <= 1e-8);
    CHECK(std::abs(entropy_vs_exponential(law) - expect) <= 1e-8);
  }
  CHECK(exp_cost(2.0, 1.0).value() == doctest::Approx(1.0 - std::log(2.0)));
  CHECK(exp_cost(0.0, 1.0).is_pos_inf());
  const auto r = check_transpoexp_tilt(2.0, 200);
  CHECK(r.holds);
  const auto law = gamma_law(2.0, 0.8);
  CHECK(entropy_vs_exponential(law) == doctest::Approx(gamma_entropy_vs_exponential(2.0, 0.8)).epsilon(1e-7));
  const auto g = check_transpoexp_general(law, 200, 1e-3);
  CHECK(g.holds);
  CHECK(g.lhs <= g.rhs + 1e-3);
}

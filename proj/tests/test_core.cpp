#include <doctest.h>

#include <cmath>
#include <numeric>

#include "tilt/core.hpp"
#include "tilt/parallel.hpp"
#include "tilt/rng.hpp"

using namespace tilt;

namespace {

// sup_t t x - Lambda_p(t) by a coarse scan then golden section, independent of legendre_1d.
double legendre_oracle(double x, double p) {
  auto obj = [&](double t) { return t * x - std::log(p * std::exp(t) + (1 - p) * std::exp(-t)); };
  double best = -30, bv = obj(best);
  for (double t = -30; t <= 30; t += 1e-3)
    if (obj(t) > bv) bv = obj(t), best = t;
  double a = best - 1e-3, b = best + 1e-3;
  for (int i = 0; i < 200; ++i) {
    const double c = a + (b - a) / 3, d = b - (b - a) / 3;
    (obj(c) < obj(d) ? a : b) = obj(c) < obj(d) ? c : d;
  }
  return obj(0.5 * (a + b));
}

}  // namespace

TEST_CASE("spins are packed little-endian") {
  CHECK(spin(0b101, 0) == 1);
  CHECK(spin(0b101, 1) == -1);
  CHECK(spin(0b101, 2) == 1);
  CHECK(spins_of(0b10, 2) == std::vector<double>{-1.0, 1.0});
}

TEST_CASE("Bernoulli parameter validation and tilt") {
  CHECK_THROWS(BernoulliParam(0.0));
  CHECK_THROWS(BernoulliParam(1.0));
  CHECK_THROWS(BernoulliParam(std::nan("")));
  const BernoulliParam p(0.3);
  CHECK(p.h0() == doctest::Approx(-0.4));
  CHECK(std::tanh(p.tilt0()) == doctest::Approx(p.h0()).epsilon(1e-14));
}

TEST_CASE("rate function is the Legendre transform of the log-Laplace transform") {
  for (double p : {0.1, 0.5, 0.8})
    for (double x : {-0.9, -0.3, 0.0, 0.45, 0.95}) {
      const BernoulliParam bp(p);
      CHECK(rate_Ip(x, bp).value() == doctest::Approx(legendre_oracle(x, p)).epsilon(1e-9));
    }
  const BernoulliParam bp(0.3);
  CHECK(std::abs(rate_Ip(bp.h0(), bp).value()) < 1e-15);
  CHECK(rate_Ip(1.0, bp).value() == doctest::Approx(-std::log(0.3)));
  CHECK(rate_Ip(1.5, bp).is_pos_inf());
  // Derivative against a central difference.
  const double x = 0.2, h = 1e-6;
  const double fd = (rate_Ip(x + h, bp).value() - rate_Ip(x - h, bp).value()) / (2 * h);
  CHECK(rate_Ip_derivative(x, bp) == doctest::Approx(fd).epsilon(1e-8));
}

TEST_CASE("rate I is the entropy of the product measure against the uniform one") {
  const std::vector<double> y{0.3, -0.7, 1.0};
  double brute = 0;
  for (std::uint64_t s = 0; s < 8; ++s) {
    double q = 1;
    for (int i = 0; i < 3; ++i) q *= 0.5 * (1 + spin(s, i) * y[i]);
    if (q > 0) brute += q * std::log(q * 8);
  }
  CHECK(rate_I(y).value() == doctest::Approx(brute).epsilon(1e-13));
  CHECK(rate_I(y).value() == doctest::Approx(rate_Ip_sum(y, BernoulliParam(0.5)).value()).epsilon(1e-14));
}

TEST_CASE("log-Laplace transform is stable and matches the direct formula") {
  const BernoulliParam p(0.3);
  for (double t : {-3.0, -0.1, 0.0, 2.5})
    CHECK(log_laplace_bernoulli(t, p) == doctest::Approx(std::log(0.3 * std::exp(t) + 0.7 * std::exp(-t))));
  CHECK(log_laplace_bernoulli(800.0, p) == doctest::Approx(800.0 + std::log(0.3)));
  CHECK(log_laplace_bernoulli(-800.0, p) == doctest::Approx(800.0 + std::log(0.7)));
  CHECK(log_laplace_bernoulli_derivative(0.0, p) == doctest::Approx(p.h0()));
}

TEST_CASE("exponential rate and log-Laplace transform") {
  CHECK(exp_rate(1.0).value() == 0.0);
  CHECK(exp_rate(2.0).value() == doctest::Approx(1.0 - std::log(2.0)));
  CHECK(exp_rate(0.0).is_pos_inf());
  CHECK(exp_log_laplace(0.5).value() == doctest::Approx(std::log(2.0)));
  CHECK(exp_log_laplace(1.0).is_pos_inf());
  const auto r = legendre_1d([](double s) { return exp_log_laplace(s).to_double(); }, 3.0, -50.0, 0.999999, 4000);
  CHECK(r.value == doctest::Approx(exp_rate(3.0).value()).epsilon(1e-7));
}

TEST_CASE("dense distributions validate their input") {
  CHECK_THROWS(DenseDistribution(1, {0.5, 0.6}));
  CHECK_THROWS(DenseDistribution(1, {1.5, -0.5}));
  CHECK_THROWS(DenseDistribution(2, {0.5, 0.5}));
  CHECK_THROWS(DenseDistribution::uniform(kMaxDenseDim + 1));
  const auto d = DenseDistribution::from_weights(2, {1, 1, 1, 5});
  CHECK(d[3] == doctest::Approx(0.625));
  const auto m = d.means();
  CHECK(m[0] == doctest::Approx(0.5));  // states 1 and 3 have x_0 = +1
}

TEST_CASE("product measures materialize to their means") {
  const ProductMeasure pm({0.4, -0.2, 0.9}, BernoulliParam(0.5));
  const auto d = pm.materialize();
  const auto m = d.means();
  CHECK(m[0] == doctest::Approx(0.4));
  CHECK(m[1] == doctest::Approx(-0.2));
  CHECK(m[2] == doctest::Approx(0.9));
  CHECK(d[0b101] == doctest::Approx(0.7 * 0.6 * 0.95));
  CHECK(std::exp(pm.log_prob(0b101)) == doctest::Approx(pm.prob(0b101)));
}

TEST_CASE("relative entropy against hand values") {
  const auto nu = DenseDistribution(1, {0.25, 0.75});
  const auto mu = DenseDistribution(1, {0.5, 0.5});
  const double expect = 0.25 * std::log(0.5) + 0.75 * std::log(1.5);
  CHECK(relative_entropy(nu, mu).value() == doctest::Approx(expect));
  CHECK(relative_entropy_to_reference(nu, BernoulliParam(0.5)).value() == doctest::Approx(expect));
  CHECK(relative_entropy(mu, DenseDistribution::point_mass(1, 0)).is_pos_inf());
  // Product measure: H(nu | mu_p^n) = sum I_p(y_i).
  const BernoulliParam p(0.3);
  const ProductMeasure pm({0.4, -0.2}, p);
  CHECK(relative_entropy_to_reference(pm.materialize(), p).value() ==
        doctest::Approx(rate_Ip_sum(pm.y(), p).value()).epsilon(1e-13));
}

TEST_CASE("log-sum-exp accumulator") {
  LogSumExp acc;
  CHECK(acc.value() == -HUGE_VAL);
  for (double v : {1.0, 2.0, 3.0}) acc.add(v);
  CHECK(acc.value() == doctest::Approx(std::log(std::exp(1.0) + std::exp(2.0) + std::exp(3.0))));
  LogSumExp big, other;
  big.add(1000.0);
  other.add(1000.0);
  big.merge(other);
  CHECK(big.value() == doctest::Approx(1000.0 + std::log(2.0)));
}

TEST_CASE("counter RNG is a pure function of (seed, tag, index)") {
  CounterRng a(7, StreamTag::gaussian, 3), b(7, StreamTag::gaussian, 3), c(7, StreamTag::rademacher, 3);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const double x = a.uniform(), y = b.uniform(), z = c.uniform();
    CHECK(x == y);
    CHECK(x > 0.0);
    CHECK(x < 1.0);
    differs = differs || x != z;
  }
  CHECK(differs);
}

TEST_CASE("chunked reduction does not depend on the thread cap") {
  auto sum = [] {
    return chunked_reduce<double>(
        100000, [](std::uint64_t lo, std::uint64_t hi) {
          double s = 0;
          for (auto i = lo; i < hi; ++i) s += 1.0 / (1.0 + static_cast<double>(i));
          return s;
        },
        [](double x, double y) { return x + y; });
  };
  set_thread_cap(1);
  const double one = sum();
  set_thread_cap(0);
  const double all = sum();
  CHECK(one == all);
}

#include <doctest.h>

#include <cmath>

#include "tilt/core.hpp"
#include "tilt/nld.hpp"
#include "tilt/rng.hpp"

using namespace tilt;

namespace {

double lambda_p(double t, double p) {
  const double m = std::abs(t);
  return m + std::log(p * std::exp(t - m) + (1 - p) * std::exp(-t - m));
}

// Convex dual of the linear rate: sup_{l >= 0} l t - sum Lambda_p(l a_i), by golden section.
double linear_rate_oracle(const Eigen::VectorXd& a, double t, double p) {
  auto obj = [&](double l) {
    double s = l * t;
    for (double ai : a) s -= lambda_p(l * ai, p);
    return s;
  };
  double lo = 0, hi = 200;
  for (int i = 0; i < 300; ++i) {
    const double c = lo + (hi - lo) * 0.382, d = lo + (hi - lo) * 0.618;
    (obj(c) < obj(d) ? lo : hi) = obj(c) < obj(d) ? c : d;
  }
  return std::max(0.0, obj(0.5 * (lo + hi)));
}

double binary_rate(double y) {
  return 0.5 * (1 + y) * std::log(1 + y) + 0.5 * (1 - y) * std::log(1 - y);
}

}  // namespace

TEST_CASE("linear rate function against its convex dual") {
  const Eigen::Vector3d a(1.0, 0.5, -0.25);
  for (double p : {0.3, 0.5})
    for (double t : {0.2, 0.8, 1.5}) {
      const auto r = phi_p(Potential::linear(a), t, BernoulliParam(p));
      CHECK(r.method == "closed_form_1d");
      CHECK(r.phi.value() == doctest::Approx(linear_rate_oracle(a, t, p)).epsilon(1e-7));
    }
}

TEST_CASE("rate function edge cases") {
  const auto f = Potential::linear(Eigen::Vector2d(1, 1));
  CHECK(phi_p(f, 2.5, BernoulliParam(0.5)).phi.is_pos_inf());
  CHECK(phi_p(f, -0.5, BernoulliParam(0.5)).phi.value() == 0.0);
  // At t = ||a||_1 only the all-ones vertex qualifies.
  CHECK(phi_p(f, 2.0, BernoulliParam(0.5)).phi.value() == doctest::Approx(2 * std::log(2.0)).epsilon(1e-9));
}

TEST_CASE("product potential y1 y2") {
  const auto f = Potential::multilinear(2, {{0b11, 1.0}});
  const auto full = phi_p(f, 1.0, BernoulliParam(0.5));
  CHECK(full.phi.value() == doctest::Approx(2 * std::log(2.0)).epsilon(1e-7));
  // The symmetric point y1 = y2 = sqrt(t) is optimal.
  const auto half = phi_p(f, 0.5, BernoulliParam(0.5));
  CHECK(half.phi.value() == doctest::Approx(2 * binary_rate(std::sqrt(0.5))).epsilon(1e-6));
  REQUIRE(half.lower_bound.has_value());
  CHECK(*half.lower_bound <= half.phi.value() + 1e-12);
  REQUIRE(half.minimizer.has_value());
  CHECK(f.eval(*half.minimizer) >= 0.5 - 1e-9);
}

TEST_CASE("exact tails") {
  const auto f = Potential::linear(Eigen::Vector2d(1, 1));
  CHECK(tail_exact(f, 2.0, BernoulliParam(0.5)).value() == doctest::Approx(-std::log(4.0)));
  CHECK(tail_exact(f, 0.0, BernoulliParam(0.5)).value() == doctest::Approx(std::log(0.75)));
  CHECK(tail_exact(f, 3.0, BernoulliParam(0.5)).is_neg_inf());
  CHECK(tail_exact(f, 2.0, BernoulliParam(0.2)).value() == doctest::Approx(2 * std::log(0.2)));
}

TEST_CASE("Chernoff: the exact tail of a linear potential lies below -phi") {
  CounterRng rng(2, StreamTag::generic, 0);
  for (int k = 0; k < 10; ++k) {
    Eigen::VectorXd a(6);
    for (auto& v : a) v = rng.normal();
    const double t = 0.5 * a.cwiseAbs().sum() * rng.uniform();
    const auto f = Potential::linear(a);
    const BernoulliParam p(0.4);
    const auto tail = tail_exact(f, t, p);
    const auto rate = phi_p(f, t, p);
    if (tail.is_neg_inf()) continue;
    CHECK(tail.value() <= -rate.phi.value() + 1e-9);
  }
}

TEST_CASE("rate is nondecreasing in t") {
  Eigen::MatrixXd J(3, 3);
  J << 0, 0.4, -0.2, 0.4, 0, 0.3, -0.2, 0.3, 0;
  const auto f = Potential::ising(J, Eigen::Vector3d(0.2, 0.1, -0.1));
  const auto rs = phi_p_many(f, {0.2, 0.5, 0.8, 1.1}, BernoulliParam(0.5));
  for (std::size_t i = 1; i < rs.size(); ++i) CHECK(rs[i].phi.to_double() >= rs[i - 1].phi.to_double() - 1e-7);
}

TEST_CASE("nonlinear large deviation report") {
  const Eigen::Vector4d a(1.0, 0.8, -0.6, 0.4);
  const auto f = Potential::linear(a);
  const BernoulliParam p(0.5);
  const double t = 1.8, delta = 0.2;
  const auto r = nld_report(f, t, delta, p);
  CHECK(r.gate_met);  // b(V) = 0 for linear potentials
  CHECK(r.asserted);
  CHECK(r.holds);
  CHECK(r.monotone_on_grid);
  const double expect_rhs = -r.phi_at_t_minus_delta.phi.value() +
                            std::log(4 * r.L * std::log(1 / (0.25)) / delta);
  CHECK(r.bound_rhs.value() == doctest::Approx(expect_rhs).epsilon(1e-12));
  CHECK(r.exact_log_tail.value() == doctest::Approx(tail_exact(f, t, p).value()));
  const auto j = to_json(r);
  CHECK(j.contains("gate_failed"));
  CHECK(j["seed"] == r.seed);
}

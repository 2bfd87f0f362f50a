#include <doctest.h>

#include <cmath>

#include "tilt/core.hpp"
#include "tilt/free_energy.hpp"
#include "tilt/potentials.hpp"
#include "tilt/rng.hpp"

using namespace tilt;

namespace {

double brute_log_z(const Potential& f, double p) {
  double z = 0;
  const int n = f.n();
  for (std::uint64_t s = 0; s < (std::uint64_t{1} << n); ++s) {
    const int ups = __builtin_popcountll(s);
    z += std::pow(p, ups) * std::pow(1 - p, n - ups) * std::exp(f.eval_vertex(s));
  }
  return std::log(z);
}

double binary_entropy_rate(double y) {  // I(y) for p = 1/2
  double v = 0;
  if (y > -1) v += 0.5 * (1 + y) * std::log(1 + y);
  if (y < 1) v += 0.5 * (1 - y) * std::log(1 - y);
  return v;
}

Eigen::MatrixXd couplings(int n, double scale, std::uint64_t seed) {
  CounterRng rng(seed, StreamTag::generic, 0);
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < i; ++j) J(i, j) = J(j, i) = scale * rng.normal();
  return J;
}

}  // namespace

TEST_CASE("exact log partition against brute force") {
  for (double p : {0.3, 0.5}) {
    const auto f = Potential::ising(couplings(8, 0.4, 1), Eigen::VectorXd::LinSpaced(8, -0.5, 0.5));
    CHECK(exact_log_partition(f, BernoulliParam(p)) == doctest::Approx(brute_log_z(f, p)).epsilon(1e-12));
  }
  const Eigen::Vector3d a(0.5, -1.2, 2.0);
  const BernoulliParam p(0.3);
  double sum = 0;
  for (double ai : a) sum += std::log(0.3 * std::exp(ai) + 0.7 * std::exp(-ai));
  CHECK(exact_log_partition(Potential::linear(a), p) == doctest::Approx(sum).epsilon(1e-13));
  CHECK(exact_log_partition(Potential::zero(5)) == doctest::Approx(0.0));
}

TEST_CASE("Gibbs measure is normalized and saturates the variational principle") {
  const auto f = Potential::ising(couplings(6, 0.5, 2), Eigen::VectorXd::Constant(6, 0.2));
  const BernoulliParam p(0.4);
  const auto nu = gibbs_measure(f, p);
  double total = 0;
  for (double v : nu.probs()) total += v;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-14));
  // The slack log Z - (int f dnu - H(nu | mu)) vanishes at the Gibbs measure only.
  CHECK(std::abs(gibbs_check(f, nu, p).value()) < 1e-12);
  CHECK(gibbs_check(f, DenseDistribution::uniform(6), p).value() > 1e-3);
  CHECK(gibbs_check(f, DenseDistribution::point_mass(6, 5), p).value() > 0);
}

TEST_CASE("mean-field functional against a direct product expectation") {
  const auto f = Potential::ising(couplings(4, 0.7, 3), Eigen::Vector4d(0.1, 0.2, -0.3, 0));
  const BernoulliParam p(0.5);
  const std::vector<double> y{0.2, -0.6, 0.9, 0.0};
  const auto table = f.vertex_table();
  double mean = 0;
  for (std::uint64_t s = 0; s < 16; ++s) {
    double w = 1;
    for (int i = 0; i < 4; ++i) w *= 0.5 * (1 + spin(s, i) * y[i]);
    mean += w * table[s];
  }
  double rate = 0;
  for (double v : y) rate += binary_entropy_rate(v);
  CHECK(meanfield_functional(f, p, y) == doctest::Approx(mean - rate).epsilon(1e-12));
}

TEST_CASE("mean field is exact for linear potentials") {
  const Eigen::Vector3d a(0.7, -0.4, 1.5);
  const BernoulliParam p(0.3);
  MeanFieldConfig cfg;
  cfg.seed = 1;
  const auto sol = meanfield_optimize(Potential::linear(a), p, cfg);
  CHECK(sol.value == doctest::Approx(exact_log_partition(Potential::linear(a), p)).epsilon(1e-10));
  for (int i = 0; i < 3; ++i) CHECK(sol.argmax[i] == doctest::Approx(std::tanh(a[i] + p.tilt0())).epsilon(1e-8));
}

TEST_CASE("two-spin ferromagnet: mean field against a one-dimensional search") {
  for (double beta : {0.3, 1.0}) {
    Eigen::MatrixXd J(2, 2);
    J << 0, beta, beta, 0;
    const auto f = Potential::ising(J);
    // With h = 0 the optimum is symmetric, y1 = y2 = y: maximize 2 beta y^2 - 2 I(y).
    double best = -HUGE_VAL;
    for (double y = -1; y <= 1; y += 1e-5) best = std::max(best, 2 * beta * y * y - 2 * binary_entropy_rate(y));
    MeanFieldConfig cfg;
    cfg.seed = 2;
    const auto sol = meanfield_optimize(f, BernoulliParam(0.5), cfg);
    CHECK(sol.value == doctest::Approx(best).epsilon(1e-8));
    CHECK(exact_log_partition(f) == doctest::Approx(std::log(std::cosh(2 * beta))).epsilon(1e-13));
    CHECK(sol.value <= exact_log_partition(f) + 1e-12);
  }
}

TEST_CASE("gap report: sandwich and width bound on random Ising instances") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const int n = 8;
    const Eigen::MatrixXd J = couplings(n, 0.3, 10 + seed);
    const auto f = Potential::ising(J);
    GapConfig cfg;
    cfg.meanfield.seed = seed;
    const auto r = meanfield_gap_report(f, BernoulliParam(0.5), cfg);
    CHECK(r.gap >= -1e-9);
    CHECK(r.gibbs_ok);
    CHECK(r.ratio_ok);
    // b = 2 E ||J eps||_1 by brute force.
    double b = 0;
    for (std::uint64_t s = 0; s < 256; ++s) {
      Eigen::VectorXd eps(n);
      for (int i = 0; i < n; ++i) eps[i] = spin(s, i);
      b += 2 * (J * eps).cwiseAbs().sum() / 256;
    }
    CHECK(r.width.mean == doctest::Approx(b).epsilon(1e-12));
    CHECK(r.width.mean <= 2 * std::sqrt(double(n)) * f.hs_norm() + 1e-12);
    CHECK(r.log_z == doctest::Approx(brute_log_z(f, 0.5)).epsilon(1e-12));
  }
}

TEST_CASE("mean-field optimizer is deterministic in the seed") {
  const auto f = Potential::ising(couplings(10, 0.5, 4), Eigen::VectorXd::Constant(10, 0.1));
  MeanFieldConfig cfg;
  cfg.seed = 9;
  const auto a = meanfield_optimize(f, BernoulliParam(0.5), cfg);
  const auto b = meanfield_optimize(f, BernoulliParam(0.5), cfg);
  CHECK(a.value == b.value);
  CHECK(a.argmax == b.argmax);
  CHECK(a.starts > 0);
}

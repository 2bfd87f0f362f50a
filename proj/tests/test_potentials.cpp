#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "tilt/core.hpp"
#include "tilt/potentials.hpp"
#include "tilt/rng.hpp"

using namespace tilt;

namespace {

Eigen::MatrixXd random_symmetric(int n, std::uint64_t seed) {
  CounterRng rng(seed, StreamTag::generic, 0);
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < i; ++j) J(i, j) = J(j, i) = rng.normal();
  return J;
}

double ising_direct(const Eigen::MatrixXd& J, const Eigen::VectorXd& h, const std::vector<double>& x) {
  double v = 0;
  for (int i = 0; i < J.rows(); ++i) {
    v += h[i] * x[i];
    for (int j = 0; j < J.cols(); ++j) v += x[i] * J(i, j) * x[j];
  }
  return v;
}

// E f(X) for X with independent coordinates of mean y, straight from the table.
double product_mean(const std::vector<double>& table, int n, const std::vector<double>& y) {
  double total = 0;
  for (std::size_t s = 0; s < table.size(); ++s) {
    double w = 1;
    for (int i = 0; i < n; ++i) w *= 0.5 * (1 + spin(s, i) * y[i]);
    total += w * table[s];
  }
  return total;
}

std::filesystem::path temp_file(const std::string& name) { return std::filesystem::temp_directory_path() / name; }

}  // namespace

TEST_CASE("Ising evaluation matches the quadratic form") {
  const int n = 5;
  const auto J = random_symmetric(n, 1);
  Eigen::VectorXd h = Eigen::VectorXd::LinSpaced(n, -1, 1);
  const auto f = Potential::ising(J, h);
  const std::vector<double> y{0.1, -0.5, 0.9, 0.0, -1.0};
  CHECK(f.eval(y) == doctest::Approx(ising_direct(J, h, y)));
  for (std::uint64_t s = 0; s < 32; ++s) CHECK(f.eval_vertex(s) == doctest::Approx(ising_direct(J, h, spins_of(s, n))));
  CHECK_THROWS_AS(f.eval(std::vector<double>{2, 0, 0, 0, 0}), std::domain_error);
}

TEST_CASE("Ising constructor rejects invalid couplings") {
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(2, 2);
  J(0, 1) = 1;
  CHECK_THROWS(Potential::ising(J));
  J(1, 0) = 1;
  J(0, 0) = 1;
  CHECK_THROWS(Potential::ising(J));
}

TEST_CASE("gradient matches central differences") {
  const int n = 4;
  const auto f = Potential::ising(random_symmetric(n, 2), Eigen::VectorXd::Ones(n));
  const std::vector<double> y{0.2, -0.3, 0.4, 0.1};
  const auto g = f.gradient(y);
  for (int i = 0; i < n; ++i) {
    auto up = y, down = y;
    up[i] += 1e-6;
    down[i] -= 1e-6;
    CHECK(g[i] == doctest::Approx((f.eval(up) - f.eval(down)) / 2e-6).epsilon(1e-7));
  }
}

TEST_CASE("vertex table interpolant is the multilinear extension") {
  const int n = 4;
  CounterRng rng(3, StreamTag::generic, 0);
  std::vector<double> table(16);
  for (auto& v : table) v = rng.normal();
  const auto f = Potential::from_vertex_table(n, table);
  for (std::uint64_t s = 0; s < 16; ++s) CHECK(f.eval_vertex(s) == doctest::Approx(table[s]).epsilon(1e-12));
  const std::vector<double> y{0.3, -0.8, 0.1, 0.5};
  CHECK(f.eval(y) == doctest::Approx(product_mean(table, n, y)).epsilon(1e-12));
  CHECK(multilinear_interpolate(table, n, y) == doctest::Approx(product_mean(table, n, y)).epsilon(1e-12));
}

TEST_CASE("Gray-code walker visits every vertex with the right value") {
  const int n = 6;
  const auto f = Potential::ising(random_symmetric(n, 4), Eigen::VectorXd::Constant(n, 0.3));
  VertexWalker w(f, 0);
  std::vector<int> seen(64, 0);
  for (int k = 0; k < 64; ++k) {
    ++seen[w.state()];
    CHECK(w.value() == doctest::Approx(f.eval_vertex(w.state())).epsilon(1e-12));
    if (k + 1 < 64) w.advance();
  }
  for (int c : seen) CHECK(c == 1);
}

TEST_CASE("discrete gradient of a linear table is the coefficient vector") {
  const auto f = Potential::linear(Eigen::Vector3d(0.5, -1.0, 2.0));
  const auto table = f.vertex_table();
  for (std::uint64_t s = 0; s < 8; ++s) {
    const auto g = discrete_gradient(table, 3, s);
    CHECK(g[0] == doctest::Approx(0.5));
    CHECK(g[1] == doctest::Approx(-1.0));
    CHECK(g[2] == doctest::Approx(2.0));
  }
}

TEST_CASE("scaling and permutation") {
  const auto f = Potential::ising(random_symmetric(3, 5), Eigen::Vector3d(1, 2, 3));
  const std::vector<double> y{0.1, 0.2, -0.4};
  CHECK(f.scaled(2.5).eval(y) == doctest::Approx(2.5 * f.eval(y)));
  const std::vector<int> perm{2, 0, 1};
  const std::vector<double> py{y[2], y[0], y[1]};
  CHECK(f.permuted(perm).eval(py) == doctest::Approx(f.eval(y)));
}

TEST_CASE("gradient sup-norm by brute force over a fine grid") {
  Eigen::MatrixXd J(2, 2);
  J << 0, 0.7, 0.7, 0;
  const auto f = Potential::ising(J, Eigen::Vector2d(0.3, -0.2));
  double best = 0;
  for (double a = -1; a <= 1.0001; a += 0.05)
    for (double b = -1; b <= 1.0001; b += 0.05) {
      const auto g = f.gradient(std::vector<double>{std::clamp(a, -1.0, 1.0), std::clamp(b, -1.0, 1.0)});
      best = std::max(best, std::hypot(g[0], g[1]));
    }
  CHECK(f.gradient_sup_norm() == doctest::Approx(best).epsilon(1e-12));
  CHECK(f.hs_norm() == doctest::Approx(0.7 * std::sqrt(2.0)));
}

TEST_CASE("harmonic extension gap") {
  // Multilinear functions coincide with their extension.
  const auto f = Potential::ising(random_symmetric(3, 6), Eigen::Vector3d(0.1, 0, 0));
  CHECK(std::abs(harmonic_extension_gap(f, 8, 1).gap) < 1e-9);
  // f = -|y|^2 has extension -n, so the gap is n, attained at 0.
  SmoothFunction g;
  g.n = 3;
  g.value = [](std::span<const double> y) {
    double s = 0;
    for (double v : y) s -= v * v;
    return s;
  };
  const auto r = harmonic_extension_gap(g, 8, 1);
  CHECK(r.gap == doctest::Approx(3.0).epsilon(1e-6));
  for (double v : r.argmax) CHECK(std::abs(v) < 1e-3);
}

TEST_CASE("Matrix Market and CSV round trips") {
  const auto J = random_symmetric(4, 7);
  const auto path = temp_file("tilt_test_J.mtx");
  write_matrix_market(path.string(), J);
  const auto back = read_matrix_market(path.string());
  CHECK((back - J).cwiseAbs().maxCoeff() < 1e-15);

  const auto vpath = temp_file("tilt_test_v.csv");
  std::ofstream(vpath) << "# comment\n1.5\n-2\n0.25,9\n";
  const auto v = read_vector_csv(vpath.string());
  REQUIRE(v.size() == 3);
  CHECK(v[2] == 0.25);

  const auto tpath = temp_file("tilt_test_t.csv");
  std::ofstream(tpath) << "0,1\n1,2\n2,3\n3,4\n";
  const auto t = read_table_csv(tpath.string(), 2);
  CHECK(t == std::vector<double>{1, 2, 3, 4});

  const auto bad = temp_file("tilt_test_bad.mtx");
  std::ofstream(bad) << "not a matrix\n";
  CHECK_THROWS(read_matrix_market(bad.string()));
  CHECK_THROWS(read_matrix_market("/nonexistent/J.mtx"));
  for (const auto& p : {path, vpath, tpath, bad}) std::filesystem::remove(p);
}

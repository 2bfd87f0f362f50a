#ifndef TILT_POTENTIALS_HPP
#define TILT_POTENTIALS_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace tilt {

// f(x) = <x, J x> + <h, x>, J symmetric with zero diagonal.
struct IsingPotential {
  Eigen::MatrixXd J;
  Eigen::VectorXd h;
};

// f(x) = <a, x>.
struct LinearPotential {
  Eigen::VectorXd a;
};

// f(x) = sum_S c_S prod_{i in S} x_i; subsets packed as bitmasks.
struct MultilinearPotential {
  int n = 0;
  std::map<std::uint64_t, double> coeffs;
};

// A potential on [-1,1]^n. Every variant is multilinear, so eval is also the
// harmonic extension of the vertex restriction.
class Potential {
public:
  using Variant = std::variant<IsingPotential, LinearPotential, MultilinearPotential>;

  static Potential ising(Eigen::MatrixXd J, Eigen::VectorXd h);
  static Potential ising(Eigen::MatrixXd J);  // h = 0
  static Potential linear(Eigen::VectorXd a);
  static Potential multilinear(int n, std::map<std::uint64_t, double> coeffs);
  static Potential zero(int n);
  // Multilinear interpolant of a 2^n vertex table (Walsh-Hadamard coefficients).
  static Potential from_vertex_table(int n, std::span<const double> table);

  int n() const { return n_; }
  const Variant& variant() const { return v_; }
  bool is_ising() const { return std::holds_alternative<IsingPotential>(v_); }
  bool is_linear() const { return std::holds_alternative<LinearPotential>(v_); }
  const IsingPotential& as_ising() const { return std::get<IsingPotential>(v_); }
  const LinearPotential& as_linear() const { return std::get<LinearPotential>(v_); }
  const MultilinearPotential& as_multilinear() const { return std::get<MultilinearPotential>(v_); }

  // Throws std::domain_error outside the cube.
  double eval(std::span<const double> x) const;
  std::vector<double> gradient(std::span<const double> y) const;
  double eval_vertex(std::uint64_t state) const;

  // Dense table of vertex values, index = packed state.
  std::vector<double> vertex_table() const;

  // The same potential scaled by c.
  Potential scaled(double c) const;
  // Coordinates relabeled: new coordinate i is old coordinate perm[i].
  Potential permuted(std::span<const int> perm) const;

  // Hilbert-Schmidt norm of J (0 for non-Ising variants).
  double hs_norm() const;
  // Exactly max over [-1,1]^n of ||grad f||_2 by vertex enumeration (the
  // gradient is multilinear, so the convex norm peaks at a vertex).
  double gradient_sup_norm() const;

private:
  Potential(int n, Variant v) : n_(n), v_(std::move(v)) {}
  int n_;
  Variant v_;
};

// Walks the vertices with packed index in [lo, hi) in Gray-code order
// (state = k ^ (k >> 1)), updating the value incrementally for Ising/linear.
class VertexWalker {
public:
  VertexWalker(const Potential& f, std::uint64_t k);
  std::uint64_t state() const { return state_; }
  double value() const { return value_; }
  // Moves from Gray index k to k + 1.
  void advance();

private:
  const Potential& f_;
  std::uint64_t k_;
  std::uint64_t state_;
  double value_;
  Eigen::VectorXd x_, field_;
};

// i-th coordinate: (table[x with x_i=+1] - table[x with x_i=-1]) / 2.
std::vector<double> discrete_gradient(std::span<const double> table, int n, std::uint64_t state);
// All 2^n discrete gradients, row-major (state * n + i).
std::vector<double> discrete_gradient_table(std::span<const double> table, int n);

// E f(X_y), X_y the product measure with mean y, by contracting one coordinate at a time.
double multilinear_interpolate(std::span<const double> table, int n, std::span<const double> y);

// Pointwise smooth function on [-1,1]^n, used only by the extension-gap estimator.
struct SmoothFunction {
  int n = 0;
  std::function<double(std::span<const double>)> value;
  // Optional; finite differences are used when empty.
  std::function<std::vector<double>(std::span<const double>)> gradient;
};

struct ExtensionGapResult {
  double gap = 0.0;                 // estimate of sup_y f(y) - g(y)
  std::vector<double> argmax;
  double width_estimate = 0.0;      // b of sampled gradient set
  std::size_t gradient_samples = 0;
  int starts = 0;
  std::uint64_t seed = 0;
};

// sup over the cube of f - g, g the harmonic extension of f restricted to
// the vertices, by multi-start projected ascent. The reported width is b of
// a finite sample of the gradient set (a lower estimate of b(V)).
ExtensionGapResult harmonic_extension_gap(const SmoothFunction& f, int starts, std::uint64_t seed);
ExtensionGapResult harmonic_extension_gap(const Potential& f, int starts, std::uint64_t seed);

// IO -----------------------------------------------------------------------

// Matrix Market coordinate file (real, symmetric or general), 1-based indices.
Eigen::MatrixXd read_matrix_market(const std::string& path);
void write_matrix_market(const std::string& path, const Eigen::MatrixXd& J);
// One value per line (extra columns ignored); '#' comments allowed.
Eigen::VectorXd read_vector_csv(const std::string& path);
// Rows "bitmask,coefficient".
std::map<std::uint64_t, double> read_multilinear_csv(const std::string& path);
// Rows "bitmask,value"; returns a dense 2^n table.
std::vector<double> read_table_csv(const std::string& path, int n);
// One vector per row, comma separated.
std::vector<std::vector<double>> read_vectors_csv(const std::string& path);

}  // namespace tilt

#endif

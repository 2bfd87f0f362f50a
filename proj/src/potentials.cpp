#include "tilt/potentials.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "tilt/core.hpp"
#include "tilt/parallel.hpp"
#include "tilt/rng.hpp"
#include "tilt/width.hpp"

namespace tilt {

namespace {

void check_cube(std::span<const double> x, int n) {
  if (static_cast<int>(x.size()) != n) throw std::invalid_argument("potential: dimension mismatch");
  for (double v : x)
    if (!(std::abs(v) <= 1.0)) throw std::domain_error("potential: point outside [-1,1]^n");
}

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

// In-place transform between multilinear coefficients and vertex values.
// forward: coefficients -> values; otherwise values -> coefficients.
void walsh_hadamard(std::vector<double>& t, int n, bool forward) {
  for (int i = 0; i < n; ++i) {
    const std::size_t bit = std::size_t{1} << i;
    for (std::size_t s = 0; s < t.size(); ++s) {
      if (s & bit) continue;
      const double lo = t[s], hi = t[s | bit];
      if (forward) {
        t[s] = lo - hi;  // x_i = -1
        t[s | bit] = lo + hi;
      } else {
        t[s] = 0.5 * (lo + hi);
        t[s | bit] = 0.5 * (hi - lo);
      }
    }
  }
}

// Visits all vertices in Gray-code order with the Ising local field maintained
// incrementally: fn(state, value).
template <class Fn>
void visit_ising_vertices(const IsingPotential& p, Fn&& fn) {
  const int n = static_cast<int>(p.h.size());
  Eigen::VectorXd x = Eigen::VectorXd::Constant(n, -1.0);
  Eigen::VectorXd field = p.J * x;  // J x
  double value = x.dot(field) + p.h.dot(x);
  std::uint64_t state = 0;
  fn(state, value);
  const std::uint64_t count = std::uint64_t{1} << n;
  for (std::uint64_t k = 1; k < count; ++k) {
    const int i = std::countr_zero(k);
    const double xi = x[i];
    // Flipping x_i changes <x,Jx> by -4 x_i (Jx)_i (zero diagonal) and <h,x> by -2 h_i x_i.
    value += -4.0 * xi * field[i] - 2.0 * p.h[i] * xi;
    field.noalias() -= 2.0 * xi * p.J.col(i);
    x[i] = -xi;
    state ^= std::uint64_t{1} << i;
    fn(state, value);
  }
}

}  // namespace

Potential Potential::ising(Eigen::MatrixXd J, Eigen::VectorXd h) {
  const auto n = J.rows();
  if (J.cols() != n || h.size() != n) throw std::invalid_argument("ising: J must be n x n and h of length n");
  const double scale = std::max(1.0, J.cwiseAbs().maxCoeff());
  for (Eigen::Index i = 0; i < n; ++i) {
    if (J(i, i) != 0.0) throw std::invalid_argument("ising: J must have a zero diagonal");
    for (Eigen::Index j = 0; j < i; ++j)
      if (std::abs(J(i, j) - J(j, i)) > 1e-12 * scale) throw std::invalid_argument("ising: J must be symmetric");
  }
  Eigen::MatrixXd Js = 0.5 * (J + J.transpose());
  return Potential(static_cast<int>(n), IsingPotential{std::move(Js), std::move(h)});
}

Potential Potential::ising(Eigen::MatrixXd J) {
  const auto n = J.rows();
  return ising(std::move(J), Eigen::VectorXd::Zero(n));
}

Potential Potential::linear(Eigen::VectorXd a) {
  const int n = static_cast<int>(a.size());
  return Potential(n, LinearPotential{std::move(a)});
}

Potential Potential::multilinear(int n, std::map<std::uint64_t, double> coeffs) {
  if (n < 0 || n > 63) throw std::invalid_argument("multilinear: unsupported dimension");
  const std::uint64_t full = n == 0 ? 0 : (~std::uint64_t{0} >> (64 - n));
  for (const auto& [mask, c] : coeffs)
    if (mask & ~full) throw std::invalid_argument("multilinear: subset outside {1..n}");
  return Potential(n, MultilinearPotential{n, std::move(coeffs)});
}

Potential Potential::zero(int n) { return linear(Eigen::VectorXd::Zero(n)); }

Potential Potential::from_vertex_table(int n, std::span<const double> table) {
  if (n > kMaxDenseDim || table.size() != (std::size_t{1} << n))
    throw std::invalid_argument("from_vertex_table: need 2^n values");
  std::vector<double> t(table.begin(), table.end());
  walsh_hadamard(t, n, false);
  std::map<std::uint64_t, double> coeffs;
  for (std::size_t s = 0; s < t.size(); ++s)
    if (t[s] != 0.0) coeffs.emplace(s, t[s]);
  return multilinear(n, std::move(coeffs));
}

double Potential::eval(std::span<const double> x) const {
  check_cube(x, n_);
  return std::visit(Overloaded{
                        [&](const IsingPotential& p) {
                          const Eigen::Map<const Eigen::VectorXd> v(x.data(), n_);
                          return v.dot(p.J * v) + p.h.dot(v);
                        },
                        [&](const LinearPotential& p) {
                          const Eigen::Map<const Eigen::VectorXd> v(x.data(), n_);
                          return p.a.dot(v);
                        },
                        [&](const MultilinearPotential& p) {
                          double total = 0.0;
                          for (const auto& [mask, c] : p.coeffs) {
                            double term = c;
                            for (std::uint64_t m = mask; m; m &= m - 1) term *= x[std::countr_zero(m)];
                            total += term;
                          }
                          return total;
                        },
                    },
                    v_);
}

std::vector<double> Potential::gradient(std::span<const double> y) const {
  check_cube(y, n_);
  std::vector<double> g(n_, 0.0);
  std::visit(Overloaded{
                 [&](const IsingPotential& p) {
                   const Eigen::Map<const Eigen::VectorXd> v(y.data(), n_);
                   Eigen::Map<Eigen::VectorXd>(g.data(), n_) = 2.0 * (p.J * v) + p.h;
                 },
                 [&](const LinearPotential& p) { Eigen::Map<Eigen::VectorXd>(g.data(), n_) = p.a; },
                 [&](const MultilinearPotential& p) {
                   for (const auto& [mask, c] : p.coeffs) {
                     for (std::uint64_t m = mask; m; m &= m - 1) {
                       const int i = std::countr_zero(m);
                       double term = c;
                       for (std::uint64_t r = mask & ~(std::uint64_t{1} << i); r; r &= r - 1)
                         term *= y[std::countr_zero(r)];
                       g[i] += term;
                     }
                   }
                 },
             },
             v_);
  return g;
}

double Potential::eval_vertex(std::uint64_t state) const {
  if (const auto* m = std::get_if<MultilinearPotential>(&v_)) {
    double total = 0.0;
    for (const auto& [mask, c] : m->coeffs) total += (std::popcount(mask & ~state) & 1) ? -c : c;
    return total;
  }
  const auto x = spins_of(state, n_);
  return eval(x);
}

std::vector<double> Potential::vertex_table() const {
  if (n_ > kMaxDenseDim) throw std::invalid_argument("vertex_table: dimension too large");
  const std::size_t size = std::size_t{1} << n_;
  std::vector<double> t(size, 0.0);
  std::visit(Overloaded{
                 [&](const IsingPotential& p) { visit_ising_vertices(p, [&](std::uint64_t s, double v) { t[s] = v; }); },
                 [&](const LinearPotential& p) {
                   for (std::size_t s = 0; s < size; ++s) {
                     double v = 0.0;
                     for (int i = 0; i < n_; ++i) v += spin(s, i) * p.a[i];
                     t[s] = v;
                   }
                 },
                 [&](const MultilinearPotential& p) {
                   for (const auto& [mask, c] : p.coeffs) t[mask] = c;
                   walsh_hadamard(t, n_, true);
                 },
             },
             v_);
  return t;
}

Potential Potential::scaled(double c) const {
  return std::visit(Overloaded{
                        [&](const IsingPotential& p) { return Potential(n_, IsingPotential{c * p.J, c * p.h}); },
                        [&](const LinearPotential& p) { return Potential(n_, LinearPotential{c * p.a}); },
                        [&](const MultilinearPotential& p) {
                          auto m = p;
                          for (auto& [mask, v] : m.coeffs) v *= c;
                          return Potential(n_, std::move(m));
                        },
                    },
                    v_);
}

Potential Potential::permuted(std::span<const int> perm) const {
  if (static_cast<int>(perm.size()) != n_) throw std::invalid_argument("permuted: bad permutation");
  return std::visit(Overloaded{
                        [&](const IsingPotential& p) {
                          IsingPotential q{Eigen::MatrixXd(n_, n_), Eigen::VectorXd(n_)};
                          for (int i = 0; i < n_; ++i) {
                            q.h[i] = p.h[perm[i]];
                            for (int j = 0; j < n_; ++j) q.J(i, j) = p.J(perm[i], perm[j]);
                          }
                          return Potential(n_, std::move(q));
                        },
                        [&](const LinearPotential& p) {
                          LinearPotential q{Eigen::VectorXd(n_)};
                          for (int i = 0; i < n_; ++i) q.a[i] = p.a[perm[i]];
                          return Potential(n_, std::move(q));
                        },
                        [&](const MultilinearPotential& p) {
                          std::vector<int> inverse(n_);
                          for (int i = 0; i < n_; ++i) inverse[perm[i]] = i;
                          MultilinearPotential q{n_, {}};
                          for (const auto& [mask, c] : p.coeffs) {
                            std::uint64_t out = 0;
                            for (std::uint64_t m = mask; m; m &= m - 1)
                              out |= std::uint64_t{1} << inverse[std::countr_zero(m)];
                            q.coeffs[out] += c;
                          }
                          return Potential(n_, std::move(q));
                        },
                    },
                    v_);
}

double Potential::hs_norm() const {
  if (const auto* p = std::get_if<IsingPotential>(&v_)) return p->J.norm();
  return 0.0;
}

double Potential::gradient_sup_norm() const {
  if (const auto* p = std::get_if<LinearPotential>(&v_)) return p->a.norm();
  if (n_ > kMaxDenseDim) throw std::invalid_argument("gradient_sup_norm: dimension too large");
  double best = 0.0;
  if (const auto* p = std::get_if<IsingPotential>(&v_)) {
    // grad = 2 J x + h; track J x along the Gray code.
    Eigen::VectorXd x = Eigen::VectorXd::Constant(n_, -1.0);
    Eigen::VectorXd field = p->J * x;
    best = (2.0 * field + p->h).norm();
    for (std::uint64_t k = 1; k < (std::uint64_t{1} << n_); ++k) {
      const int i = std::countr_zero(k);
      field.noalias() -= 2.0 * x[i] * p->J.col(i);
      x[i] = -x[i];
      best = std::max(best, (2.0 * field + p->h).norm());
    }
    return best;
  }
  const auto table = vertex_table();
  const auto grads = discrete_gradient_table(table, n_);
  for (std::size_t s = 0; s < table.size(); ++s) {
    double sq = 0.0;
    for (int i = 0; i < n_; ++i) sq += grads[s * n_ + i] * grads[s * n_ + i];
    best = std::max(best, std::sqrt(sq));
  }
  return best;
}

VertexWalker::VertexWalker(const Potential& f, std::uint64_t k) : f_(f), k_(k), state_(k ^ (k >> 1)) {
  const int n = f.n();
  x_.resize(n);
  for (int i = 0; i < n; ++i) x_[i] = spin(state_, i);
  if (f.is_ising()) {
    const auto& p = f.as_ising();
    field_ = p.J * x_;
    value_ = x_.dot(field_) + p.h.dot(x_);
  } else if (f.is_linear()) {
    value_ = f.as_linear().a.dot(x_);
  } else {
    value_ = f.eval_vertex(state_);
  }
}

void VertexWalker::advance() {
  ++k_;
  const int i = std::countr_zero(k_);
  const double xi = x_[i];
  state_ ^= std::uint64_t{1} << i;
  x_[i] = -xi;
  if (f_.is_ising()) {
    const auto& p = f_.as_ising();
    value_ += -4.0 * xi * field_[i] - 2.0 * p.h[i] * xi;
    field_.noalias() -= 2.0 * xi * p.J.col(i);
  } else if (f_.is_linear()) {
    value_ -= 2.0 * xi * f_.as_linear().a[i];
  } else {
    value_ = f_.eval_vertex(state_);
  }
}

std::vector<double> discrete_gradient(std::span<const double> table, int n, std::uint64_t state) {
  if (table.size() != (std::size_t{1} << n)) throw std::invalid_argument("discrete_gradient: table size");
  std::vector<double> g(n);
  for (int i = 0; i < n; ++i) {
    const std::uint64_t bit = std::uint64_t{1} << i;
    g[i] = 0.5 * (table[state | bit] - table[state & ~bit]);
  }
  return g;
}

std::vector<double> discrete_gradient_table(std::span<const double> table, int n) {
  if (table.size() != (std::size_t{1} << n)) throw std::invalid_argument("discrete_gradient_table: table size");
  std::vector<double> g(table.size() * n);
  for (std::size_t s = 0; s < table.size(); ++s)
    for (int i = 0; i < n; ++i) {
      const std::size_t bit = std::size_t{1} << i;
      g[s * n + i] = 0.5 * (table[s | bit] - table[s & ~bit]);
    }
  return g;
}

double multilinear_interpolate(std::span<const double> table, int n, std::span<const double> y) {
  if (table.size() != (std::size_t{1} << n) || static_cast<int>(y.size()) != n)
    throw std::invalid_argument("multilinear_interpolate: size mismatch");
  std::vector<double> t(table.begin(), table.end());
  std::size_t len = t.size();
  for (int i = 0; i < n; ++i) {
    const double up = 0.5 * (1.0 + y[i]), down = 0.5 * (1.0 - y[i]);
    len >>= 1;
    for (std::size_t s = 0; s < len; ++s) t[s] = down * t[2 * s] + up * t[2 * s + 1];
  }
  return t[0];
}

namespace {

std::vector<double> fd_gradient(const std::function<double(std::span<const double>)>& h, std::vector<double> y) {
  std::vector<double> g(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double y0 = y[i];
    const double lo = std::max(-1.0, y0 - 1e-6), hi = std::min(1.0, y0 + 1e-6);
    y[i] = hi;
    const double fh = h(y);
    y[i] = lo;
    const double fl = h(y);
    y[i] = y0;
    g[i] = (fh - fl) / (hi - lo);
  }
  return g;
}

}  // namespace

ExtensionGapResult harmonic_extension_gap(const SmoothFunction& f, int starts, std::uint64_t seed) {
  const int n = f.n;
  if (n < 1 || n > kMaxDenseDim) throw std::invalid_argument("harmonic_extension_gap: bad dimension");
  const std::size_t size = std::size_t{1} << n;
  std::vector<double> table(size);
  for (std::size_t s = 0; s < size; ++s) table[s] = f.value(spins_of(s, n));

  auto gap_at = [&](std::span<const double> y) { return f.value(y) - multilinear_interpolate(table, n, y); };
  auto grad_f = [&](std::span<const double> y) {
    if (f.gradient) return f.gradient(y);
    return fd_gradient(f.value, std::vector<double>(y.begin(), y.end()));
  };

  starts = std::max(starts, 1);
  struct StartResult {
    double value = -HUGE_VAL;
    std::vector<double> y;
    std::vector<std::vector<double>> visited_gradients;
  };
  std::vector<StartResult> results(starts);
  parallel_for(static_cast<std::size_t>(starts), [&](std::size_t k) {
    CounterRng rng(seed, StreamTag::extension_start, k);
    std::vector<double> y(n);
    for (auto& v : y) v = k == 0 ? 0.0 : 2.0 * rng.uniform() - 1.0;
    double val = gap_at(y);
    auto& out = results[k];
    out.visited_gradients.push_back(grad_f(y));
    double step = 0.5;
    for (int it = 0; it < 300 && step > 1e-12; ++it) {
      const auto g = fd_gradient(gap_at, y);
      bool moved = false;
      while (step > 1e-12) {
        std::vector<double> cand(n);
        for (int i = 0; i < n; ++i) cand[i] = std::clamp(y[i] + step * g[i], -1.0, 1.0);
        const double cv = gap_at(cand);
        if (cv > val + 1e-15) {
          y = std::move(cand);
          val = cv;
          step *= 2.0;
          moved = true;
          break;
        }
        step *= 0.5;
      }
      if (!moved) break;
    }
    out.visited_gradients.push_back(grad_f(y));
    out.value = val;
    out.y = std::move(y);
  });

  ExtensionGapResult r;
  r.starts = starts;
  r.seed = seed;
  r.gap = -HUGE_VAL;
  std::vector<std::vector<double>> gradient_set;
  for (auto& res : results) {
    if (res.value > r.gap) {
      r.gap = res.value;
      r.argmax = res.y;
    }
    for (auto& g : res.visited_gradients) gradient_set.push_back(std::move(g));
  }
  if (n <= 12)
    for (std::size_t s = 0; s < size; ++s) gradient_set.push_back(grad_f(spins_of(s, n)));
  r.gradient_samples = gradient_set.size();
  const auto mode = n <= 16 ? WidthMode::exact : WidthMode::monte_carlo;
  r.width_estimate = rademacher_width_finite(gradient_set, mode, 100000, seed).mean;
  return r;
}

ExtensionGapResult harmonic_extension_gap(const Potential& f, int starts, std::uint64_t seed) {
  SmoothFunction s;
  s.n = f.n();
  s.value = [&f](std::span<const double> y) { return f.eval(y); };
  s.gradient = [&f](std::span<const double> y) { return f.gradient(y); };
  return harmonic_extension_gap(s, starts, seed);
}

// IO -----------------------------------------------------------------------

namespace {

std::ifstream open_or_throw(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return in;
}

std::vector<double> parse_numbers(const std::string& line, char sep) {
  std::vector<double> out;
  std::string token;
  std::istringstream ss(line);
  while (std::getline(ss, token, sep)) {
    const auto b = token.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    const auto e = token.find_last_not_of(" \t\r");
    token = token.substr(b, e - b + 1);
    std::size_t used = 0;
    out.push_back(std::stod(token, &used));
    if (used != token.size()) throw std::invalid_argument("bad number '" + token + "'");
  }
  return out;
}

// Data lines of a CSV, skipping blanks, '#' comments and a non-numeric header.
std::vector<std::vector<double>> csv_rows(const std::string& path) {
  auto in = open_or_throw(path);
  std::vector<std::vector<double>> rows;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos || line[b] == '#') continue;
    try {
      auto row = parse_numbers(line, ',');
      if (!row.empty()) rows.push_back(std::move(row));
    } catch (const std::exception&) {
      if (!first) throw std::runtime_error(path + ": malformed row '" + line + "'");
    }
    first = false;
  }
  return rows;
}

}  // namespace

Eigen::MatrixXd read_matrix_market(const std::string& path) {
  auto in = open_or_throw(path);
  std::string line;
  if (!std::getline(in, line) || line.rfind("%%MatrixMarket", 0) != 0)
    throw std::runtime_error(path + ": missing MatrixMarket banner");
  std::istringstream banner(line);
  std::string tag, object, format, field, symmetry;
  banner >> tag >> object >> format >> field >> symmetry;
  auto lower = [](std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
  };
  if (lower(object) != "matrix" || lower(format) != "coordinate")
    throw std::runtime_error(path + ": only coordinate matrices are supported");
  if (lower(field) != "real" && lower(field) != "integer" && lower(field) != "double")
    throw std::runtime_error(path + ": only real/integer fields are supported");
  const bool symmetric = lower(symmetry) == "symmetric";
  if (!symmetric && lower(symmetry) != "general") throw std::runtime_error(path + ": unsupported symmetry");
  while (std::getline(in, line))
    if (!line.empty() && line[0] != '%') break;
  long rows = 0, cols = 0, nnz = 0;
  if (!(std::istringstream(line) >> rows >> cols >> nnz) || rows != cols || rows <= 0)
    throw std::runtime_error(path + ": bad size line");
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(rows, cols);
  for (long k = 0; k < nnz; ++k) {
    long i = 0, j = 0;
    double v = 0;
    do {
      if (!std::getline(in, line)) throw std::runtime_error(path + ": truncated entry list");
    } while (line.empty() || line[0] == '%');
    if (!(std::istringstream(line) >> i >> j >> v) || i < 1 || j < 1 || i > rows || j > cols)
      throw std::runtime_error(path + ": bad entry '" + line + "'");
    J(i - 1, j - 1) = v;
    if (symmetric) J(j - 1, i - 1) = v;
  }
  return J;
}

void write_matrix_market(const std::string& path, const Eigen::MatrixXd& J) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  long nnz = 0;
  for (Eigen::Index j = 0; j < J.cols(); ++j)
    for (Eigen::Index i = j; i < J.rows(); ++i) nnz += J(i, j) != 0.0;
  out << "%%MatrixMarket matrix coordinate real symmetric\n" << J.rows() << ' ' << J.cols() << ' ' << nnz << '\n';
  out.precision(17);
  for (Eigen::Index j = 0; j < J.cols(); ++j)
    for (Eigen::Index i = j; i < J.rows(); ++i)
      if (J(i, j) != 0.0) out << i + 1 << ' ' << j + 1 << ' ' << J(i, j) << '\n';
}

Eigen::VectorXd read_vector_csv(const std::string& path) {
  const auto rows = csv_rows(path);
  Eigen::VectorXd v(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) v[i] = rows[i].front();
  return v;
}

std::map<std::uint64_t, double> read_multilinear_csv(const std::string& path) {
  std::map<std::uint64_t, double> coeffs;
  for (const auto& row : csv_rows(path)) {
    if (row.size() < 2 || row[0] < 0 || row[0] != std::floor(row[0]))
      throw std::runtime_error(path + ": rows must be 'bitmask,coefficient'");
    coeffs[static_cast<std::uint64_t>(row[0])] += row[1];
  }
  return coeffs;
}

std::vector<double> read_table_csv(const std::string& path, int n) {
  if (n < 0 || n > kMaxDenseDim) throw std::invalid_argument("read_table_csv: bad dimension");
  std::vector<double> table(std::size_t{1} << n, 0.0);
  std::vector<bool> seen(table.size(), false);
  for (const auto& row : csv_rows(path)) {
    if (row.size() < 2 || row[0] < 0 || row[0] != std::floor(row[0]) || row[0] >= static_cast<double>(table.size()))
      throw std::runtime_error(path + ": rows must be 'bitmask,value' with bitmask < 2^n");
    const auto s = static_cast<std::size_t>(row[0]);
    table[s] = row[1];
    seen[s] = true;
  }
  if (std::find(seen.begin(), seen.end(), false) != seen.end())
    throw std::runtime_error(path + ": table does not cover every vertex");
  return table;
}

std::vector<std::vector<double>> read_vectors_csv(const std::string& path) {
  auto rows = csv_rows(path);
  for (const auto& r : rows)
    if (r.size() != rows.front().size()) throw std::runtime_error(path + ": rows differ in length");
  return rows;
}

}  // namespace tilt

#include "tilt/transport.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <boost/math/distributions/gamma.hpp>
#include <cmath>
#include <numeric>
#include <queue>
#include <stdexcept>
#include <unordered_map>

#include "tilt/parallel.hpp"
#include "tilt/quadrature.hpp"

namespace tilt {

ExtReal w_p_cost(int x, double u, BernoulliParam p) {
  if (x != 1 && x != -1) throw std::invalid_argument("w_p_cost: x must be +1 or -1");
  if (!(std::abs(u) <= 1.0)) throw std::domain_error("w_p_cost: u outside [-1,1]");
  if (!(x * (p.h0() - u) < 0)) return 0.0;
  if (std::abs(u) == 1.0) return ExtReal::pos_inf();
  return 2.0 * std::abs(rate_Ip_derivative(u, p));
}

ExtReal w_p_cost(std::span<const double> x, std::span<const double> u, BernoulliParam p) {
  if (x.size() != u.size()) throw std::invalid_argument("w_p_cost: dimension mismatch");
  ExtReal total = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) total += w_p_cost(x[i] > 0 ? 1 : -1, u[i], p);
  return total;
}

double explicit_coupling_cost(double h, BernoulliParam p) {
  if (!(std::abs(h) <= 1.0)) throw std::domain_error("explicit_coupling_cost: h outside [-1,1]");
  // (1/2) int 2|I_p'| over the segment between h0 and h; I_p vanishes at h0.
  return std::abs(rate_Ip(h, p).value() - rate_Ip(p.h0(), p).value());
}

double explicit_coupling_cost_quadrature(double h, BernoulliParam p) {
  if (!(std::abs(h) <= 1.0)) throw std::domain_error("explicit_coupling_cost: h outside [-1,1]");
  auto integrand = [&](double u) {
    const int x = h - u >= 0 ? 1 : -1;  // sg(0) = 1
    return 0.5 * w_p_cost(x, u, p).to_double();
  };
  const double lo = std::min(h, p.h0()), hi = std::max(h, p.h0());
  const std::array<double, 4> pts{-1.0, lo, hi, 1.0};
  return integrate_pieces(integrand, pts).value;
}

double dual_Yt_mean(double t, BernoulliParam p) {
  const double m = log_laplace_bernoulli_derivative(t, p);  // mean of the tilted law
  const double h0 = p.h0();
  const double Im = rate_Ip(m, p).value();
  if (h0 <= m) {
    // Y = t on (-1,h0), t - 2(I_p'(u)) on (h0,m), -t on (m,1).
    return 0.5 * t * (h0 + 1.0) + 0.5 * t * (m - h0) - Im - 0.5 * t * (1.0 - m);
  }
  // Y = t on (-1,m), -t + 2 I_p'(u) on (m,h0), -t on (h0,1).
  return 0.5 * t * (m + 1.0) - 0.5 * t * (h0 - m) - Im - 0.5 * t * (1.0 - h0);
}

double dual_Yt_mean_quadrature(double t, BernoulliParam p) {
  auto Y = [&](double u) {
    const double up = t - w_p_cost(1, u, p).to_double();
    const double down = -t - w_p_cost(-1, u, p).to_double();
    return 0.5 * std::max(up, down);
  };
  const double m = log_laplace_bernoulli_derivative(t, p);
  const double lo = std::min(m, p.h0()), hi = std::max(m, p.h0());
  const std::array<double, 4> pts{-1.0, lo, hi, 1.0};
  // When m is near +-1 the outer piece is tiny and the kink at m is only
  // located to rounding; a depth cap keeps the refinement from chasing it.
  return integrate_pieces(Y, pts, 1e-11, 10).value;
}

ExtReal exp_cost(double x, double y) {
  if (!(x > 0.0) || !(y > 0.0)) return ExtReal::pos_inf();
  return y * exp_rate(x / y).value();
}

ExtReal exp_cost(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("exp_cost: dimension mismatch");
  ExtReal total = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) total += exp_cost(x[i], y[i]);
  return total;
}

std::vector<double> midpoint_grid(int m) {
  if (m < 1) throw std::invalid_argument("midpoint_grid: m must be positive");
  std::vector<double> u(m);
  for (int j = 1; j <= m; ++j) u[j - 1] = -1.0 + (2.0 * j - 1.0) / m;
  return u;
}

// TransportProblem --------------------------------------------------------------

void TransportProblem::validate() const {
  auto check_weights = [](const std::vector<double>& w, const char* what) {
    if (w.empty()) throw std::invalid_argument(std::string("transport: empty ") + what);
    double total = 0.0;
    for (double v : w) {
      if (!(v >= 0.0)) throw std::invalid_argument(std::string("transport: negative weight in ") + what);
      total += v;
    }
    if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument(std::string("transport: ") + what + " is not a probability vector");
  };
  check_weights(source_weights, "source");
  check_weights(target_weights, "target");
  if (kind == CostKind::matrix) {
    if (cost.size() != source_weights.size() * target_weights.size())
      throw std::invalid_argument("transport: cost matrix has the wrong shape");
    for (double c : cost)
      if (!(c >= 0.0)) throw std::invalid_argument("transport: costs must be nonnegative");
    return;
  }
  if (source_atoms.size() != source_weights.size() || target_atoms.size() != target_weights.size())
    throw std::invalid_argument("transport: atoms and weights differ in count");
  const auto n = source_atoms.front().size();
  for (const auto& a : source_atoms)
    if (a.size() != n) throw std::invalid_argument("transport: source atoms differ in dimension");
  for (const auto& a : target_atoms)
    if (a.size() != n) throw std::invalid_argument("transport: target atoms differ in dimension");
  if (kind == CostKind::w_p) BernoulliParam{p};
}

std::vector<double> TransportProblem::cost_matrix() const {
  validate();
  if (kind == CostKind::matrix) return cost;
  const std::size_t k = source_weights.size(), m = target_weights.size();
  std::vector<double> c(k * m);
  const BernoulliParam bp(kind == CostKind::w_p ? p : 0.5);
  parallel_for(k, [&](std::size_t i) {
    for (std::size_t j = 0; j < m; ++j)
      c[i * m + j] = kind == CostKind::w_p ? w_p_cost(source_atoms[i], target_atoms[j], bp).to_double()
                                           : exp_cost(source_atoms[i], target_atoms[j]).to_double();
  });
  return c;
}

TransportPlan solve_ot(const TransportProblem& problem) {
  const auto cost = problem.cost_matrix();
  const auto ns = network_simplex(problem.source_weights, problem.target_weights, cost);
  TransportPlan plan;
  plan.entries = ns.plan;
  plan.primal = ns.primal;
  plan.dual = ns.dual;
  plan.duality_gap = ns.primal - ns.dual;
  plan.source_potential = ns.source_potential;
  plan.target_potential = ns.target_potential;
  plan.cs_residual = ns.cs_residual;
  plan.pivots = ns.pivots;
  std::vector<double> rows(problem.source_weights.size(), 0.0), cols(problem.target_weights.size(), 0.0);
  for (const auto& e : plan.entries) {
    rows[e.source] += e.mass;
    cols[e.target] += e.mass;
  }
  for (std::size_t i = 0; i < rows.size(); ++i)
    plan.marginal_error = std::max(plan.marginal_error, std::abs(rows[i] - problem.source_weights[i]));
  for (std::size_t j = 0; j < cols.size(); ++j)
    plan.marginal_error = std::max(plan.marginal_error, std::abs(cols[j] - problem.target_weights[j]));
  return plan;
}

namespace {

double json_real(const Json& v) {
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "+inf" || s == "inf") return HUGE_VAL;
    throw std::invalid_argument("transport json: bad number '" + s + "'");
  }
  return v.get<double>();
}

void read_side(const Json& side, std::vector<std::vector<double>>& atoms, std::vector<double>& weights) {
  if (!side.is_array() || side.size() != 2) throw std::invalid_argument("transport json: side must be [atoms, weights]");
  atoms.clear();
  for (const auto& a : side[0]) {
    if (a.is_number())
      atoms.push_back({a.get<double>()});
    else
      atoms.push_back(a.get<std::vector<double>>());
  }
  weights = side[1].get<std::vector<double>>();
}

Json write_atoms(const std::vector<std::vector<double>>& atoms) {
  Json a = Json::array();
  for (const auto& v : atoms) {
    if (v.size() == 1)
      a.push_back(v[0]);
    else
      a.push_back(v);
  }
  return a;
}

}  // namespace

TransportProblem transport_problem_from_json(const Json& j) {
  TransportProblem t;
  read_side(j.at("source"), t.source_atoms, t.source_weights);
  read_side(j.at("target"), t.target_atoms, t.target_weights);
  const auto& c = j.at("cost");
  if (c.is_string()) {
    const auto s = c.get<std::string>();
    if (s == "exp") {
      t.kind = CostKind::exp;
    } else if (s.rfind("w_p:", 0) == 0) {
      t.kind = CostKind::w_p;
      t.p = std::stod(s.substr(4));
    } else {
      throw std::invalid_argument("transport json: unknown cost '" + s + "'");
    }
  } else {
    t.kind = CostKind::matrix;
    for (const auto& row : c) {
      if (row.size() != t.target_weights.size()) throw std::invalid_argument("transport json: ragged cost matrix");
      for (const auto& v : row) t.cost.push_back(json_real(v));
    }
  }
  t.validate();
  return t;
}

Json to_json(const TransportProblem& t) {
  Json j;
  j["source"] = Json::array({write_atoms(t.source_atoms), t.source_weights});
  j["target"] = Json::array({write_atoms(t.target_atoms), t.target_weights});
  if (t.kind == CostKind::exp) {
    j["cost"] = "exp";
  } else if (t.kind == CostKind::w_p) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "w_p:%.17g", t.p);
    j["cost"] = buf;
  } else {
    Json rows = Json::array();
    const std::size_t m = t.target_weights.size();
    for (std::size_t i = 0; i < t.source_weights.size(); ++i) {
      Json row = Json::array();
      for (std::size_t k = 0; k < m; ++k) row.push_back(json_number(t.cost[i * m + k]));
      rows.push_back(row);
    }
    j["cost"] = rows;
  }
  return j;
}

Json to_json(const TransportPlan& plan, bool include_entries) {
  Json j;
  j["primal"] = json_number(plan.primal);
  j["dual"] = json_number(plan.dual);
  j["duality_gap"] = json_number(plan.duality_gap);
  j["cs_residual"] = json_number(plan.cs_residual);
  j["marginal_error"] = json_number(plan.marginal_error);
  j["pivots"] = plan.pivots;
  j["source_potential"] = plan.source_potential;
  if (include_entries) {
    Json e = Json::array();
    for (const auto& x : plan.entries) e.push_back({x.source, x.target, x.mass});
    j["plan"] = e;
    j["target_potential"] = plan.target_potential;
  }
  return j;
}

// Structured grid solver ---------------------------------------------------------

namespace {

constexpr double kExcluded = HUGE_VAL;
constexpr double kSmallGridArcs = 20000;

struct Side {
  std::vector<double> g;       // ascending
  std::vector<double> prefix;  // prefix[c] = sum of the c smallest
};

struct Grid {
  int m = 0;
  std::vector<double> g;     // cost when the source spin matches side[j]
  std::vector<int> side;     // +1 if u_j > h0 else -1
  Side sides[2];             // [0]: side -1, [1]: side +1
};

Grid make_grid(int m, BernoulliParam p) {
  Grid G;
  G.m = m;
  const auto u = midpoint_grid(m);
  G.g.resize(m);
  G.side.resize(m);
  for (int j = 0; j < m; ++j) {
    G.side[j] = u[j] > p.h0() ? 1 : -1;
    G.g[j] = 2.0 * std::abs(rate_Ip_derivative(u[j], p));
  }
  for (int j = 0; j < m; ++j) G.sides[G.side[j] > 0].g.push_back(G.g[j]);
  for (auto& s : G.sides) {
    std::sort(s.g.begin(), s.g.end());
    s.prefix.assign(s.g.size() + 1, 0.0);
    for (std::size_t c = 0; c < s.g.size(); ++c) s.prefix[c + 1] = s.prefix[c] + s.g[c];
  }
  return G;
}

int state_of(int x1, int x2) { return (x1 > 0 ? 1 : 0) | (x2 > 0 ? 2 : 0); }

struct DualEval {
  double value = 0.0;
  std::array<double, 4> mass{};
};

// Sum over a sorted list of min(g + alpha, beta) and the count choosing alpha.
inline void row_min(const Side& s, double alpha, double beta, double& sum, std::size_t& left) {
  const std::size_t L = s.g.size();
  if (alpha == kExcluded) {
    sum += L * beta;
    left = 0;
    return;
  }
  if (beta == kExcluded) {
    sum += s.prefix[L] + L * alpha;
    left = L;
    return;
  }
  const std::size_t c = std::lower_bound(s.g.begin(), s.g.end(), beta - alpha) - s.g.begin();
  sum += s.prefix[c] + c * alpha;
  if (c < L) sum += (L - c) * beta;
  left = c;
}

DualEval evaluate(const Grid& G, int n, const std::array<double, 4>& a, const std::array<bool, 4>& active,
                  const std::vector<double>& nu) {
  DualEval out;
  std::array<double, 4> count{};
  double sum = 0.0;
  auto opt = [&](double cost, int s) { return active[s] ? cost - a[s] : kExcluded; };
  if (n == 1) {
    for (int sigma : {-1, 1}) {
      const Side& side = G.sides[sigma > 0];
      const int A = sigma > 0 ? 1 : 0, B = 1 - A;
      // min(g - a_A, -a_B) = min(g + alpha, beta) with alpha = -a_A.
      const double alpha = active[A] ? -a[A] : kExcluded, beta = opt(0.0, B);
      std::size_t left = 0;
      row_min(side, alpha, beta, sum, left);
      count[A] += left;
      count[B] += side.g.size() - left;
    }
  } else {
    for (int s1 : {-1, 1})
      for (int s2 : {-1, 1}) {
        const Side& side1 = G.sides[s1 > 0];
        const Side& side2 = G.sides[s2 > 0];
        const int A = state_of(s1, s2), B = state_of(s1, -s2), C = state_of(-s1, s2), D = state_of(-s1, -s2);
        for (double g2 : side2.g) {
          const double va = opt(g2, A), vb = opt(0.0, B), vc = opt(g2, C), vd = opt(0.0, D);
          const int as = va <= vb ? A : B, bs = vc <= vd ? C : D;
          const double alpha = std::min(va, vb), beta = std::min(vc, vd);
          std::size_t left = 0;
          row_min(side1, alpha, beta, sum, left);
          count[as] += left;
          count[bs] += side1.g.size() - left;
        }
      }
  }
  const double M = std::pow(static_cast<double>(G.m), n);
  out.value = sum / M;
  for (int s = 0; s < (1 << n); ++s) {
    out.mass[s] = count[s] / M;
    if (active[s]) out.value += nu[s] * a[s];
  }
  return out;
}

}  // namespace

GridTransportResult solve_w_p_grid(const DenseDistribution& nu, BernoulliParam p, int m) {
  const int n = nu.n();
  if (n < 1 || n > 2) throw std::invalid_argument("solve_w_p_grid: only n = 1 or 2");
  if (m < 2) throw std::invalid_argument("solve_w_p_grid: grid too small");
  const Grid G = make_grid(m, p);
  const int k = 1 << n;
  const double M = std::pow(static_cast<double>(m), n);
  const std::vector<double>& w = nu.probs();
  if (k * M <= kSmallGridArcs) {
    // Few atoms: the mass map is too coarse for Newton, and the simplex is cheap.
    const auto plan = solve_ot(w_p_grid_problem(nu, p, m));
    GridTransportResult res;
    res.n = n;
    res.m = m;
    res.primal = plan.primal;
    res.dual = plan.dual;
    res.duality_gap = plan.duality_gap;
    res.source_potential = plan.source_potential;
    res.marginal_error = plan.marginal_error;
    return res;
  }

  std::array<bool, 4> active{};
  std::vector<int> vars;
  int anchor = -1;
  for (int s = 0; s < k; ++s) {
    active[s] = w[s] > 0;
    if (!active[s]) continue;
    if (anchor < 0)
      anchor = s;
    else
      vars.push_back(s);
  }
  // Start from the additive potentials that are optimal for the product of nu's marginals.
  std::array<double, 4> a{};
  {
    const auto y = nu.means();
    std::vector<double> slope(n);
    for (int i = 0; i < n; ++i) {
      const double yi = std::clamp(y[i], -1.0 + 1.0 / m, 1.0 - 1.0 / m);
      slope[i] = rate_Ip_derivative(yi, p);
    }
    for (int s = 0; s < k; ++s)
      for (int i = 0; i < n; ++i) a[s] += spin(s, i) * slope[i];
    const double shift = a[anchor];
    for (auto& v : a) v -= shift;
  }

  GridTransportResult res;
  res.n = n;
  res.m = m;
  const int r = static_cast<int>(vars.size());
  // The dual D(a) = sum nu_s a_s + E_j min_s (c_js - a_s) is concave and
  // polyhedral with supergradient nu - mass(a); whole grid rows tie at once,
  // so its kinks are coarse. One free potential: bisection on the
  // supergradient sign. Otherwise: central-cut ellipsoid method, which also
  // certifies D* <= D(x) + sqrt(g' P g) while the optimum stays inside.
  double max_cost = 0.0;
  for (double v : G.g) max_cost = std::max(max_cost, v);
  max_cost *= n;
  auto value_at = [&](const std::array<double, 4>& x) { return evaluate(G, n, x, active, w); };
  DualEval cur = value_at(a);
  if (r == 1) {
    const int s = vars[0];
    double lo = -2.0 * max_cost - 1.0, hi = 2.0 * max_cost + 1.0;
    for (int b = 0; b < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(hi)); ++b) {
      auto t = a;
      t[s] = 0.5 * (lo + hi);
      (value_at(t).mass[s] < w[s] ? lo : hi) = t[s];
      res.iterations = b + 1;
    }
    // The maximum sits on the kink between lo and hi; keep the better end.
    auto tl = a, th = a;
    tl[s] = lo;
    th[s] = hi;
    const auto el = value_at(tl), eh = value_at(th);
    a = el.value >= eh.value ? tl : th;
    cur = el.value >= eh.value ? el : eh;
  } else if (r > 1) {
    // Potentials relative to the anchor can be taken within the cost range.
    Eigen::VectorXd x(r);
    for (int q = 0; q < r; ++q) x[q] = 0.0;
    const double R = 2.0 * max_cost + 1.0;
    Eigen::MatrixXd P = (R * R * r) * Eigen::MatrixXd::Identity(r, r);
    auto to_a = [&](const Eigen::VectorXd& v) {
      auto t = a;
      for (int q = 0; q < r; ++q) t[vars[q]] = v[q];
      return t;
    };
    std::array<double, 4> best = to_a(x);
    DualEval best_e = value_at(best);
    double upper = HUGE_VAL;
    const double nn = r;
    for (int it = 0; it < 4000; ++it) {
      res.iterations = it + 1;
      const auto ax = to_a(x);
      const DualEval e = value_at(ax);
      if (e.value > best_e.value) {
        best_e = e;
        best = ax;
      }
      Eigen::VectorXd g(r);
      for (int q = 0; q < r; ++q) g[q] = w[vars[q]] - e.mass[vars[q]];
      const double gpg = g.dot(P * g);
      if (!(gpg > 0)) {
        upper = e.value;  // zero supergradient: x is optimal
        break;
      }
      upper = std::min(upper, e.value + std::sqrt(gpg));
      if (upper - best_e.value <= 1e-12 * std::max(1.0, std::abs(best_e.value))) break;
      const Eigen::VectorXd Pg = P * g / std::sqrt(gpg);
      x += Pg / (nn + 1.0);
      P = (nn * nn / (nn * nn - 1.0)) * (P - (2.0 / (nn + 1.0)) * Pg * Pg.transpose());
      P = 0.5 * (P + P.transpose()).eval();
    }
    a = best;
    cur = best_e;
    res.dual_upper_bound = upper;
  }
  (void)cur;

  // Final pass: assign every target to its best reduced cost, then move the
  // small excess with the cheapest regrets to produce an exactly feasible plan.
  std::vector<double> W0(m), W1(m);  // cost of spin -1 / +1 on each grid coordinate
  for (int j = 0; j < m; ++j) {
    W0[j] = G.side[j] < 0 ? G.g[j] : 0.0;
    W1[j] = G.side[j] > 0 ? G.g[j] : 0.0;
  }
  const std::int64_t total = static_cast<std::int64_t>(M);
  auto costs_of = [&](std::int64_t j, std::array<double, 4>& c) {
    const std::int64_t j1 = j % m, j2 = j / m;
    if (n == 1) {
      c[0] = W0[j1];
      c[1] = W1[j1];
    } else {
      c[0] = W0[j1] + W0[j2];
      c[1] = W1[j1] + W0[j2];
      c[2] = W0[j1] + W1[j2];
      c[3] = W1[j1] + W1[j2];
    }
  };
  auto best_of = [&](const std::array<double, 4>& c) {
    int best = -1;
    double bv = HUGE_VAL;
    for (int s = 0; s < k; ++s)
      if (active[s] && c[s] - a[s] < bv) {
        bv = c[s] - a[s];
        best = s;
      }
    return best;
  };
  // Atoms whose reduced costs tie within tau, grouped by (tie set, assigned state).
  const double tau = 1e-6 * (1.0 + max_cost);
  auto group_of = [&](const std::array<double, 4>& c, int& s) {
    s = best_of(c);
    const double bv = c[s] - a[s];
    int mask = 0;
    for (int t = 0; t < k; ++t)
      if (active[t] && c[t] - a[t] <= bv + tau) mask |= 1 << t;
    return mask;
  };
  struct Pass {
    double dual_sum = 0.0, cost_sum = 0.0;
    std::array<std::int64_t, 4> count{};
    std::array<std::int64_t, 64> gcount{};
    static Pass combine(Pass x, const Pass& y) {
      x.dual_sum += y.dual_sum;
      x.cost_sum += y.cost_sum;
      for (int s = 0; s < 4; ++s) x.count[s] += y.count[s];
      for (int g = 0; g < 64; ++g) x.gcount[g] += y.gcount[g];
      return x;
    }
  };
  const Pass pass = chunked_reduce<Pass>(
      static_cast<std::uint64_t>(total),
      [&](std::uint64_t lo, std::uint64_t hi) {
        Pass acc;
        std::array<double, 4> c{};
        for (std::uint64_t j = lo; j < hi; ++j) {
          costs_of(static_cast<std::int64_t>(j), c);
          int s = 0;
          const int mask = group_of(c, s);
          if (mask != (1 << s)) ++acc.gcount[mask * 4 + s];
          acc.dual_sum += c[s] - a[s];
          acc.cost_sum += c[s];
          ++acc.count[s];
        }
        return acc;
      },
      Pass::combine);
  res.dual = pass.dual_sum / M;
  for (int s = 0; s < k; ++s)
    if (active[s]) res.dual += w[s] * a[s];
  double primal = pass.cost_sum / M;

  std::array<double, 4> excess{};
  std::vector<int> over, under;
  for (int s = 0; s < k; ++s) {
    excess[s] = pass.count[s] / M - w[s];
    if (excess[s] > 0)
      over.push_back(s);
    else if (excess[s] < 0)
      under.push_back(s);
  }
  std::unordered_map<std::int64_t, double> moved;
  const double atom = 1.0 / M;
  if (!over.empty() && !under.empty()) {
    // At optimal potentials the excess can be routed through tied atoms at
    // (almost) no regret, possibly via intermediate states: max-flow over groups.
    const auto& gcount = pass.gcount;
    // nodes: 0 source, 1..4 states, 5..68 groups, 69 sink
    constexpr int N = 70, src = 0, snk = 69;
    std::vector<std::array<double, N>> capm(N);
    for (auto& row : capm) row.fill(0.0);
    for (int s : over) capm[src][1 + s] = excess[s];
    for (int t : under) capm[1 + t][snk] = -excess[t];
    for (int g = 0; g < 64; ++g) {
      if (gcount[g] == 0) continue;
      const int mask = g / 4, s = g % 4;
      capm[1 + s][5 + g] = gcount[g] * atom;
      for (int t = 0; t < k; ++t)
        if (t != s && (mask >> t & 1)) capm[5 + g][1 + t] = HUGE_VAL;
    }
    const auto cap0 = capm;
    for (;;) {
      std::array<int, N> prev;
      prev.fill(-1);
      prev[src] = src;
      std::queue<int> q;
      q.push(src);
      while (!q.empty() && prev[snk] < 0) {
        const int u = q.front();
        q.pop();
        for (int v = 0; v < N; ++v)
          if (prev[v] < 0 && capm[u][v] > 1e-300) {
            prev[v] = u;
            q.push(v);
          }
      }
      if (prev[snk] < 0) break;
      double f = HUGE_VAL;
      for (int v = snk; v != src; v = prev[v]) f = std::min(f, capm[prev[v]][v]);
      for (int v = snk; v != src; v = prev[v]) {
        capm[prev[v]][v] -= f;
        capm[v][prev[v]] += f;
      }
    }
    std::array<std::array<double, 4>, 64> out{};
    bool any = false;
    for (int g = 0; g < 64; ++g)
      for (int t = 0; t < k; ++t)
        if (cap0[5 + g][1 + t] > 0) {
          // Net flow on an infinite arc is its reverse residual.
          out[g][t] = capm[1 + t][5 + g];
          any = any || out[g][t] > 0;
        }
    double pending = 0.0;
    for (const auto& o : out)
      for (double v : o) pending += v;
    if (any) {
      std::array<double, 4> c{};
      int s = 0;
      for (std::int64_t j = 0; j < total && pending > 1e-18; ++j) {
        costs_of(j, c);
        const int mask = group_of(c, s);
        if (mask == (1 << s)) continue;
        auto& o = out[mask * 4 + s];
        double left = atom;
        for (int t = 0; t < k && left > 0; ++t) {
          const double tm = std::min(left, o[t]);
          if (!(tm > 0)) continue;
          primal += tm * (c[t] - c[s]);
          o[t] -= tm;
          pending -= tm;
          left -= tm;
          excess[s] -= tm;
          excess[t] += tm;
          res.moved_mass += tm;
        }
        if (left < atom) moved[j] = atom - left;
      }
    }
    over.clear();
    under.clear();
    for (int s = 0; s < k; ++s) {
      if (excess[s] > 1e-15)
        over.push_back(s);
      else if (excess[s] < -1e-15)
        under.push_back(s);
    }
  }
  if (!over.empty() && !under.empty()) {
    struct Candidate {
      double regret;
      std::int64_t j;
      int from, to;
      bool operator<(const Candidate& o) const { return regret < o.regret || (regret == o.regret && j < o.j); }
    };
    // Per (over, under) pair keep the cheapest ceil(excess * M) + 2 regrets.
    std::vector<std::priority_queue<Candidate>> heaps(16);
    std::array<std::size_t, 4> cap{};
    for (int s : over) cap[s] = static_cast<std::size_t>(std::ceil(excess[s] * M)) + 2;
    std::array<double, 4> c{};
    for (std::int64_t j = 0; j < total; ++j) {
      costs_of(j, c);
      const int s = best_of(c);
      if (excess[s] <= 0 || cap[s] == 0) continue;
      for (int t : under) {
        const Candidate cand{(c[t] - a[t]) - (c[s] - a[s]), j, s, t};
        auto& hp = heaps[s * 4 + t];
        if (hp.size() < cap[s]) {
          hp.push(cand);
        } else if (cand < hp.top()) {
          hp.pop();
          hp.push(cand);
        }
      }
    }
    std::vector<Candidate> all;
    for (auto& hp : heaps)
      for (; !hp.empty(); hp.pop()) all.push_back(hp.top());
    std::sort(all.begin(), all.end());
    for (const auto& cand : all) {
      if (excess[cand.from] <= 0 || excess[cand.to] >= 0) continue;
      double& used = moved[cand.j];
      const double t = std::min({atom - used, excess[cand.from], -excess[cand.to]});
      if (t <= 0) continue;
      costs_of(cand.j, c);
      primal += t * (c[cand.to] - c[cand.from]);
      used += t;
      excess[cand.from] -= t;
      excess[cand.to] += t;
      res.moved_mass += t;
    }
  }
  for (int s = 0; s < k; ++s) res.marginal_error = std::max(res.marginal_error, std::abs(excess[s]));
  res.primal = primal;
  res.duality_gap = res.primal - res.dual;
  res.source_potential.assign(a.begin(), a.begin() + k);
  return res;
}

TransportProblem w_p_grid_problem(const DenseDistribution& nu, BernoulliParam p, int m) {
  const int n = nu.n();
  const auto u = midpoint_grid(m);
  TransportProblem t;
  t.kind = CostKind::w_p;
  t.p = p.p();
  for (std::size_t s = 0; s < nu.size(); ++s) {
    t.source_atoms.push_back(spins_of(s, n));
    t.source_weights.push_back(nu[s]);
  }
  const std::int64_t total = static_cast<std::int64_t>(std::pow(static_cast<double>(m), n));
  for (std::int64_t j = 0; j < total; ++j) {
    std::vector<double> atom(n);
    std::int64_t r = j;
    for (int i = 0; i < n; ++i, r /= m) atom[i] = u[r % m];
    t.target_atoms.push_back(std::move(atom));
  }
  t.target_weights.assign(total, 1.0 / static_cast<double>(total));
  return t;
}

bool is_product(const DenseDistribution& nu) {
  const auto prod = ProductMeasure(nu.means()).materialize();
  for (std::size_t s = 0; s < nu.size(); ++s)
    if (std::abs(prod[s] - nu[s]) > 1e-12) return false;
  return true;
}

InequalityReport check_transpo_bernoulli(const DenseDistribution& nu, BernoulliParam p, const TranspoConfig& config) {
  const double H = relative_entropy_to_reference(nu, p).to_double();
  const bool product = is_product(nu);
  InequalityReport r;
  if (config.mode == TranspoMode::product_analytic) {
    if (!product) throw std::invalid_argument("check_transpo_bernoulli: analytic mode needs a product measure");
    double lhs = 0.0;
    for (double y : nu.means()) lhs += explicit_coupling_cost(y, p);
    r = make_report("transport_bernoulli", lhs, H, config.tolerance, "product_analytic");
  } else {
    const auto sol = solve_w_p_grid(nu, p, config.grid);
    r = make_report("transport_bernoulli", sol.primal, H, config.tolerance, "grid_lp");
    r.details["dual"] = json_number(sol.dual);
    r.details["duality_gap"] = json_number(sol.duality_gap);
    r.details["dual_upper_bound"] = json_number(sol.dual_upper_bound);
    r.details["marginal_error"] = json_number(sol.marginal_error);
    r.details["grid"] = config.grid;
  }
  r.details["n"] = nu.n();
  r.details["p"] = p.p();
  r.details["product"] = product;
  r.details["near_equality"] = std::abs(r.lhs - r.rhs) <= config.tolerance;
  return r;
}

// Exponential half-line ------------------------------------------------------

HalfLineLaw exponential_tilt_law(double lambda) {
  if (!(lambda > 0)) throw std::invalid_argument("exponential tilt: lambda must be positive");
  HalfLineLaw law;
  law.name = "exp_tilt";
  law.density = [lambda](double x) { return x < 0 ? 0.0 : std::exp(-x / lambda) / lambda; };
  law.log_density = [lambda](double x) { return -x / lambda - std::log(lambda); };
  law.quantile = [lambda](double t) { return -lambda * std::log1p(-t); };
  law.upper_quantile = [lambda](double q) { return -lambda * std::log(q); };
  return law;
}

HalfLineLaw gamma_law(double shape, double scale) {
  if (!(shape > 0) || !(scale > 0)) throw std::invalid_argument("gamma law: parameters must be positive");
  HalfLineLaw law;
  law.name = "gamma";
  const boost::math::gamma_distribution<double> dist(shape, scale);
  const double log_norm = std::lgamma(shape) + shape * std::log(scale);
  law.density = [dist](double x) { return x <= 0 ? 0.0 : boost::math::pdf(dist, x); };
  law.log_density = [=](double x) { return (shape - 1.0) * std::log(x) - x / scale - log_norm; };
  law.quantile = [dist](double t) { return boost::math::quantile(dist, t); };
  law.upper_quantile = [dist](double q) { return boost::math::quantile(boost::math::complement(dist, q)); };
  return law;
}

double entropy_vs_exponential(const HalfLineLaw& nu) {
  auto integrand = [&](double x) {
    const double d = nu.density(x);
    if (!(d > 0)) return 0.0;
    const double ld = nu.log_density ? nu.log_density(x) : std::log(d);
    return d * (ld + x);
  };
  return integrate(integrand, 0.0, HUGE_VAL).value;
}

double monotone_exp_cost(const HalfLineLaw& nu) {
  auto integrand = [&](double y) {
    if (!(y > 0)) return 0.0;
    const double tail = std::exp(-y);  // 1 - F_eta(y)
    if (tail < 1e-300) return 0.0;
    const double x = tail < 0.5 && nu.upper_quantile ? nu.upper_quantile(tail) : nu.quantile(-std::expm1(-y));
    const double z = std::log(x), w = std::log(y);
    return (x - y - y * (z - w)) * tail;
  };
  return integrate(integrand, 0.0, HUGE_VAL).value;
}

ExpLpResult exp_lp(const HalfLineLaw& nu, int atoms) {
  if (atoms < 2) throw std::invalid_argument("exp_lp: need at least two atoms");
  ExpLpResult r;
  r.atoms = atoms;
  std::vector<double> x(atoms), y(atoms);
  for (int k = 0; k < atoms; ++k) {
    const double t = (k + 0.5) / atoms;
    x[k] = nu.quantile(t);
    y[k] = -std::log1p(-t);
  }
  TransportProblem prob;
  prob.kind = CostKind::exp;
  for (int k = 0; k < atoms; ++k) {
    prob.source_atoms.push_back({x[k]});
    prob.target_atoms.push_back({y[k]});
  }
  prob.source_weights.assign(atoms, 1.0 / atoms);
  prob.target_weights.assign(atoms, 1.0 / atoms);
  const auto plan = solve_ot(prob);
  r.lp = plan.primal;
  r.duality_gap = plan.duality_gap;
  for (int k = 0; k < atoms; ++k) r.monotone += exp_cost(x[k], y[k]).value() / atoms;
  return r;
}

InequalityReport check_transpoexp_tilt(double lambda, int lp_atoms) {
  if (!(lambda > 0)) throw std::invalid_argument("check_transpoexp_tilt: lambda must be positive");
  const auto nu = exponential_tilt_law(lambda);
  // Cost of the scaling coupling x -> x / lambda.
  auto integrand = [&](double x) {
    const double d = nu.density(x);
    return d > 0 ? exp_cost(x, x / lambda).value() * d : 0.0;
  };
  const double lhs = integrate(integrand, 0.0, HUGE_VAL).value;
  const double rhs = entropy_vs_exponential(nu);
  const double closed = exp_rate(lambda).value();
  auto r = make_report("transport_exp_tilt", lhs, rhs, 1e-8, "quadrature");
  r.details["lambda"] = lambda;
  r.details["closed_form"] = closed;
  const bool equal = std::abs(lhs - rhs) <= 1e-8 && std::abs(lhs - closed) <= 1e-8;
  if (lp_atoms > 0) {
    const auto lp = exp_lp(nu, lp_atoms);
    r.details["lp"] = lp.lp;
    r.details["lp_monotone"] = lp.monotone;
    r.details["lp_atoms"] = lp_atoms;
    r.details["lp_duality_gap"] = lp.duality_gap;
    r.details["lp_within"] = std::abs(lp.lp - closed) <= 1e-2;
  }
  r.details["equality"] = equal;
  r.holds = equal && (lp_atoms <= 0 || r.details["lp_within"].get<bool>());
  return r;
}

InequalityReport check_transpoexp_general(const HalfLineLaw& nu, int lp_atoms, double tolerance) {
  const double H = entropy_vs_exponential(nu);
  const double mono = monotone_exp_cost(nu);
  const auto lp = exp_lp(nu, lp_atoms);
  auto r = make_report("transport_exp_general", lp.lp, H, tolerance, "lp");
  r.details["law"] = nu.name;
  r.details["monotone_continuum"] = mono;
  r.details["monotone_discrete"] = lp.monotone;
  r.details["lp_duality_gap"] = lp.duality_gap;
  r.details["lp_atoms"] = lp_atoms;
  // Monotone optimality in 1-D, checked rather than assumed.
  r.details["monotone_optimal"] = std::abs(lp.monotone - lp.lp) <= 1e-9 * std::max(1.0, lp.lp);
  r.details["monotone_below_entropy"] = mono <= H + tolerance;
  r.holds = r.holds && mono <= H + tolerance;
  return r;
}

}  // namespace tilt

#include "tilt/nld.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <stdexcept>

#include "tilt/free_energy.hpp"
#include "tilt/parallel.hpp"
#include "tilt/rng.hpp"

namespace tilt {

namespace {

constexpr int kMaxVertexScan = 20;

double sum_rate(std::span<const double> y, BernoulliParam p) { return rate_Ip_sum(y, p).to_double(); }

bool feasible(const Potential& f, std::span<const double> y, double t, double tol) { return f.eval(y) >= t - tol; }

// Modulus of continuity of the one-dimensional I_p: a linear part plus the
// binary entropy, whose modulus is h(d) for d <= 1/2.
double rate_modulus(double d, BernoulliParam p) {
  const double q = std::min(0.5 * d, 0.5);
  const double h = q <= 0 ? 0.0 : -q * std::log(q) - (1 - q) * std::log1p(-q);
  return std::abs(p.tilt0()) * d + h;
}

// Reference mean vector.
std::vector<double> h0_vector(int n, BernoulliParam p) { return std::vector<double>(n, p.h0()); }

RateResult closed_form_linear(const LinearPotential& lin, double t, BernoulliParam p, const RateConfig& config) {
  const int n = static_cast<int>(lin.a.size());
  RateResult r;
  r.t = t;
  r.method = "closed_form_1d";
  auto y0 = h0_vector(n, p);
  double f0 = 0.0, smax = 0.0;
  for (int i = 0; i < n; ++i) {
    f0 += lin.a[i] * y0[i];
    smax += std::abs(lin.a[i]);
  }
  if (t <= f0) {
    r.phi = 0.0;
    r.certified_upper = 0.0;
    r.minimizer = y0;
    return r;
  }
  if (t > smax + config.feas_tol) {
    r.phi = ExtReal::pos_inf();
    r.certified_upper = ExtReal::pos_inf();
    return r;
  }
  const double theta = p.tilt0();
  auto y_of = [&](double lambda) {
    std::vector<double> y(n);
    for (int i = 0; i < n; ++i) y[i] = std::tanh(theta + lambda * lin.a[i]);
    return y;
  };
  auto g = [&](double lambda) {
    const auto y = y_of(lambda);
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += lin.a[i] * y[i];
    return s;
  };
  std::vector<double> y;
  if (t >= smax) {
    // Only the sign vertex (on the support of a) reaches the maximum.
    y = y0;
    for (int i = 0; i < n; ++i)
      if (lin.a[i] != 0) y[i] = lin.a[i] > 0 ? 1.0 : -1.0;
  } else {
    double lo = 0.0, hi = 1.0;
    while (g(hi) < t && hi < 1e6) hi *= 2.0;
    for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
      const double mid = 0.5 * (lo + hi);
      (g(mid) < t ? lo : hi) = mid;
    }
    y = y_of(hi);
  }
  r.phi = sum_rate(y, p);
  r.certified_upper = r.phi;
  r.minimizer = y;
  return r;
}

// Exterior penalty in the coordinates y = tanh(u).
struct Penalty {
  const Potential& f;
  double t;
  BernoulliParam p;
  int n;

  double operator()(const std::vector<double>& u, double rho, std::vector<double>& grad) const {
    std::vector<double> y(n);
    for (int i = 0; i < n; ++i) y[i] = std::tanh(u[i]);
    const double viol = std::max(0.0, t - f.eval(y));
    const auto gf = f.gradient(y);
    const double theta = p.tilt0();
    grad.assign(n, 0.0);
    for (int i = 0; i < n; ++i) grad[i] = ((u[i] - theta) - 2.0 * rho * viol * gf[i]) * (1.0 - y[i] * y[i]);
    return sum_rate(y, p) + rho * viol * viol;
  }
};

void lbfgs(const Penalty& F, double rho, std::vector<double>& u, int max_iter = 400) {
  const int n = static_cast<int>(u.size());
  const int mem = 8;
  std::vector<std::vector<double>> S, Y;
  std::vector<double> g, g_new, d(n), u_new(n);
  double fx = F(u, rho, g);
  for (int it = 0; it < max_iter; ++it) {
    double gmax = 0.0;
    for (double v : g) gmax = std::max(gmax, std::abs(v));
    if (gmax < 1e-13) break;
    // Two-loop recursion.
    d = g;
    std::vector<double> alpha(S.size());
    for (int k = static_cast<int>(S.size()) - 1; k >= 0; --k) {
      double sy = 0, sd = 0;
      for (int i = 0; i < n; ++i) {
        sy += S[k][i] * Y[k][i];
        sd += S[k][i] * d[i];
      }
      alpha[k] = sd / sy;
      for (int i = 0; i < n; ++i) d[i] -= alpha[k] * Y[k][i];
    }
    if (!S.empty()) {
      double sy = 0, yy = 0;
      for (int i = 0; i < n; ++i) {
        sy += S.back()[i] * Y.back()[i];
        yy += Y.back()[i] * Y.back()[i];
      }
      for (double& v : d) v *= sy / yy;
    }
    for (std::size_t k = 0; k < S.size(); ++k) {
      double yd = 0, sy = 0;
      for (int i = 0; i < n; ++i) {
        yd += Y[k][i] * d[i];
        sy += S[k][i] * Y[k][i];
      }
      const double beta = yd / sy;
      for (int i = 0; i < n; ++i) d[i] += (alpha[k] - beta) * S[k][i];
    }
    double slope = 0;
    for (int i = 0; i < n; ++i) slope -= g[i] * d[i];
    if (!(slope < 0)) {
      // Not a descent direction: restart from steepest descent.
      S.clear();
      Y.clear();
      d = g;
      slope = 0;
      for (int i = 0; i < n; ++i) slope -= g[i] * g[i];
    }
    double step = 1.0, f_new = 0.0;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      for (int i = 0; i < n; ++i) u_new[i] = std::clamp(u[i] - step * d[i], -25.0, 25.0);
      f_new = F(u_new, rho, g_new);
      if (f_new <= fx + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
    std::vector<double> s(n), yv(n);
    double sy = 0;
    for (int i = 0; i < n; ++i) {
      s[i] = u_new[i] - u[i];
      yv[i] = g_new[i] - g[i];
      sy += s[i] * yv[i];
    }
    const double change = fx - f_new;
    u = u_new;
    g = g_new;
    fx = f_new;
    if (sy > 1e-300) {
      S.push_back(std::move(s));
      Y.push_back(std::move(yv));
      if (static_cast<int>(S.size()) > mem) {
        S.erase(S.begin());
        Y.erase(Y.begin());
      }
    }
    if (change <= 1e-16 * std::max(1.0, std::abs(fx))) break;
  }
}

// Newton steps along the gradient of f until f(y) >= t, staying in the cube.
void repair(const Potential& f, double t, std::vector<double>& y) {
  const double target = t + 1e-12 * std::max(1.0, std::abs(t));
  for (int it = 0; it < 60; ++it) {
    const double fy = f.eval(y);
    if (fy >= target) return;
    const auto g = f.gradient(y);
    double gg = 0;
    for (double v : g) gg += v * v;
    if (gg == 0) return;
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = std::clamp(y[i] + (target - fy) * g[i] / gg, -1.0, 1.0);
  }
}

struct Candidate {
  double value = HUGE_VAL;
  std::vector<double> y;
  void offer(const Potential& f, double t, const std::vector<double>& point, BernoulliParam p, double tol) {
    if (!feasible(f, point, t, tol)) return;
    const double v = sum_rate(point, p);
    if (v < value) {
      value = v;
      y = point;
    }
  }
};

std::vector<double> penalty_solve(const Potential& f, double t, BernoulliParam p, std::vector<double> y) {
  const int n = f.n();
  Penalty F{f, t, p, n};
  std::vector<double> u(n);
  for (int i = 0; i < n; ++i) u[i] = std::atanh(std::clamp(y[i], -1.0 + 1e-12, 1.0 - 1e-12));
  for (double rho = 1.0; rho <= 1e10; rho *= 10.0) lbfgs(F, rho, u);
  for (int i = 0; i < n; ++i) y[i] = std::tanh(u[i]);
  repair(f, t, y);
  return y;
}

struct GridBest {
  std::vector<double> upper;  // min I over f >= t - feas_tol
  std::vector<std::uint64_t> arg;
  std::vector<double> lower;  // min I over f >= t - L r
};

GridBest grid_scan(const Potential& f, const std::vector<double>& ts, BernoulliParam p, double step, double feas_tol,
                   double slack) {
  const int n = f.n();
  const std::uint64_t G = static_cast<std::uint64_t>(std::llround(2.0 / step)) + 1;
  std::uint64_t total = 1;
  for (int i = 0; i < n; ++i) total *= G;
  std::vector<double> axis(G), rate(G);
  for (std::uint64_t k = 0; k < G; ++k) {
    axis[k] = k + 1 == G ? 1.0 : -1.0 + 2.0 * static_cast<double>(k) / static_cast<double>(G - 1);
    rate[k] = rate_Ip(axis[k], p).to_double();
  }
  const std::size_t T = ts.size();
  auto fresh = [&] {
    return GridBest{std::vector<double>(T, HUGE_VAL), std::vector<std::uint64_t>(T, 0),
                    std::vector<double>(T, HUGE_VAL)};
  };
  return chunked_reduce<GridBest>(
      total,
      [&](std::uint64_t lo, std::uint64_t hi) {
        GridBest b = fresh();
        std::vector<double> y(n);
        for (std::uint64_t k = lo; k < hi; ++k) {
          std::uint64_t rem = k;
          double I = 0.0;
          for (int i = 0; i < n; ++i) {
            y[i] = axis[rem % G];
            I += rate[rem % G];
            rem /= G;
          }
          const double fy = f.eval(y);
          for (std::size_t j = 0; j < T; ++j) {
            if (fy >= ts[j] - feas_tol && I < b.upper[j]) {
              b.upper[j] = I;
              b.arg[j] = k;
            }
            if (fy >= ts[j] - slack && I < b.lower[j]) b.lower[j] = I;
          }
        }
        return b;
      },
      [&](GridBest a, const GridBest& b) {
        for (std::size_t j = 0; j < T; ++j) {
          if (b.upper[j] < a.upper[j]) {
            a.upper[j] = b.upper[j];
            a.arg[j] = b.arg[j];
          }
          a.lower[j] = std::min(a.lower[j], b.lower[j]);
        }
        return a;
      });
}

}  // namespace

std::vector<RateResult> phi_p_many(const Potential& f, const std::vector<double>& ts, BernoulliParam p,
                                   const RateConfig& config) {
  const int n = f.n();
  std::vector<RateResult> out;
  if (f.is_linear()) {
    for (double t : ts) out.push_back(closed_form_linear(f.as_linear(), t, p, config));
    return out;
  }
  const auto y0 = h0_vector(n, p);
  const double f0 = f.eval(y0);
  const bool use_grid = n >= 1 && n <= 3;
  GridBest grid;
  double step = 0, grid_correction = 0;
  std::uint64_t G = 0;
  if (use_grid) {
    step = config.grid_step > 0 ? config.grid_step : (n <= 2 ? 1e-3 : 1e-2);
    G = static_cast<std::uint64_t>(std::llround(2.0 / step)) + 1;
    step = 2.0 / static_cast<double>(G - 1);
    const double L = f.gradient_sup_norm();
    grid = grid_scan(f, ts, p, step, config.feas_tol, L * std::sqrt(static_cast<double>(n)) * 0.5 * step);
    grid_correction = n * rate_modulus(0.5 * step, p);
  }
  // Vertex candidates: the best feasible vertex is both a certificate and a start.
  std::vector<double> vertex_values;
  if (n <= kMaxVertexScan) vertex_values = f.vertex_table();

  for (std::size_t j = 0; j < ts.size(); ++j) {
    const double t = ts[j];
    RateResult r;
    r.t = t;
    r.method = use_grid ? "grid" : "penalty_optimizer";
    if (t <= f0) {
      r.phi = 0.0;
      r.certified_upper = 0.0;
      r.minimizer = y0;
      if (use_grid) r.lower_bound = 0.0;
      out.push_back(r);
      continue;
    }
    Candidate best;
    std::vector<double> best_vertex;
    if (!vertex_values.empty()) {
      double vmax = -HUGE_VAL, vbest = HUGE_VAL;
      for (std::uint64_t s = 0; s < vertex_values.size(); ++s) {
        vmax = std::max(vmax, vertex_values[s]);
        if (vertex_values[s] >= t - config.feas_tol) {
          const auto x = spins_of(s, n);
          const double v = sum_rate(x, p);
          if (v < vbest) {
            vbest = v;
            best_vertex = x;
          }
        }
      }
      // A multilinear function peaks at a vertex, so nothing is feasible beyond vmax.
      if (t > vmax + config.feas_tol) {
        r.phi = ExtReal::pos_inf();
        r.certified_upper = ExtReal::pos_inf();
        if (use_grid) r.lower_bound = HUGE_VAL;
        out.push_back(r);
        continue;
      }
      best.offer(f, t, best_vertex, p, config.feas_tol);
    }
    std::vector<std::vector<double>> starts;
    starts.push_back(y0);
    if (!best_vertex.empty()) {
      std::vector<double> s(n);
      for (int i = 0; i < n; ++i) s[i] = 0.9 * best_vertex[i] + 0.1 * y0[i];
      starts.push_back(s);
    }
    if (use_grid && grid.upper[j] < HUGE_VAL) {
      std::uint64_t rem = grid.arg[j];
      std::vector<double> s(n);
      for (int i = 0; i < n; ++i) {
        const std::uint64_t k = rem % G;
        s[i] = k + 1 == G ? 1.0 : -1.0 + step * static_cast<double>(k);
        rem /= G;
      }
      best.offer(f, t, s, p, config.feas_tol);
      starts.push_back(s);
    }
    for (int k = static_cast<int>(starts.size()); k < config.starts; ++k) {
      CounterRng rng(config.seed, StreamTag::nld_start, static_cast<std::uint64_t>(j) * 1024 + k);
      std::vector<double> s(n);
      for (int i = 0; i < n; ++i) s[i] = std::tanh(p.tilt0() + rng.normal());
      starts.push_back(s);
    }
    std::vector<std::vector<double>> solved(starts.size());
    parallel_for(starts.size(), [&](std::size_t k) { solved[k] = penalty_solve(f, t, p, starts[k]); });
    for (const auto& y : solved) best.offer(f, t, y, p, config.feas_tol);
    if (best.value < HUGE_VAL) {
      r.phi = best.value;
      r.certified_upper = best.value;
      r.minimizer = best.y;
    } else {
      // Nothing feasible was found (only possible when the vertex scan is skipped).
      r.phi = ExtReal::pos_inf();
      r.certified_upper = ExtReal::pos_inf();
    }
    if (use_grid) r.lower_bound = grid.lower[j] == HUGE_VAL ? HUGE_VAL : std::max(0.0, grid.lower[j] - grid_correction);
    out.push_back(r);
  }
  return out;
}

RateResult phi_p(const Potential& f, double t, BernoulliParam p, const RateConfig& config) {
  return phi_p_many(f, {t}, p, config).front();
}

ExtReal tail_exact(const Potential& f, double t, BernoulliParam p) {
  const int n = f.n();
  if (n > kMaxDenseDim) throw std::invalid_argument("tail_exact: n too large for enumeration");
  const double thr = t - 1e-12 * std::max(1.0, std::abs(t));
  const double lp = p.log_p(), lq = p.log_q();
  const LogSumExp acc = chunked_reduce<LogSumExp>(
      std::uint64_t{1} << n,
      [&](std::uint64_t lo, std::uint64_t hi) {
        LogSumExp l;
        if (lo >= hi) return l;
        VertexWalker w(f, lo);
        for (std::uint64_t k = lo;; ++k) {
          if (w.value() >= thr) {
            const int ups = std::popcount(w.state());
            l.add(ups * lp + (n - ups) * lq);
          }
          if (k + 1 == hi) break;
          w.advance();
        }
        return l;
      },
      LogSumExp::combine);
  const double v = acc.value();
  if (v == -HUGE_VAL) return ExtReal::neg_inf();
  return std::min(0.0, v);
}

NldReport nld_report(const Potential& f, double t, double delta, BernoulliParam p, double C, double kappa,
                     const NldConfig& config) {
  if (!(delta > 0)) throw std::invalid_argument("nld_report: delta must be positive");
  if (!(kappa > 0) || !(C >= 0)) throw std::invalid_argument("nld_report: need kappa > 0 and C >= 0");
  NldReport r;
  r.t = t;
  r.delta = delta;
  r.p = p.p();
  r.n = f.n();
  r.C_used = C;
  r.kappa_used = kappa;
  r.seed = config.seed;
  RateConfig rc = config.rate;
  rc.seed = config.seed;

  // Level t - delta first, then the increase hypothesis on (t - delta, t - delta + 2 delta].
  std::vector<double> levels{t - delta};
  for (int k = 1; k <= config.s_grid_points; ++k)
    levels.push_back(t - delta + 2.0 * delta * k / config.s_grid_points);
  const auto rates = phi_p_many(f, levels, p, rc);
  r.phi_at_t_minus_delta = rates.front();
  r.monotone_on_grid = true;
  ExtReal prev = rates.front().phi;
  for (std::size_t k = 1; k < rates.size(); ++k) {
    r.s_grid.emplace_back(levels[k], rates[k].phi);
    // Strict increase over phi(t - delta); nondecreasing along the grid.
    const bool strict = rates[k].phi > rates.front().phi || rates[k].phi.is_pos_inf();
    const bool order = !(rates[k].phi < prev);
    r.monotone_on_grid = r.monotone_on_grid && strict && order;
    prev = rates[k].phi;
  }

  r.b_V = potential_width(f, config.width_mode, config.width_samples, config.seed);
  r.L = f.gradient_sup_norm();
  if (f.is_ising()) {
    const auto& is = f.as_ising();
    const double op = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(is.J, Eigen::EigenvaluesOnly)
                          .eigenvalues()
                          .cwiseAbs()
                          .maxCoeff();
    r.L_upper_bound = 2.0 * op * std::sqrt(static_cast<double>(r.n)) + is.h.norm();
  } else {
    r.L_upper_bound = r.L;
  }
  r.log_term = std::log(r.n * r.L * std::log(1.0 / (p.p() * (1.0 - p.p()))) / delta);
  auto rhs_from = [&](ExtReal phi) -> ExtReal {
    if (phi.is_pos_inf()) return ExtReal::neg_inf();
    const double term = C * r.log_term;
    if (std::isinf(term)) return term > 0 ? ExtReal::pos_inf() : ExtReal::neg_inf();
    return ExtReal(-phi.value() + term);
  };
  r.bound_rhs = rhs_from(r.phi_at_t_minus_delta.phi);
  if (r.phi_at_t_minus_delta.lower_bound) {
    const double lb = *r.phi_at_t_minus_delta.lower_bound;
    const ExtReal v = rhs_from(lb == HUGE_VAL ? ExtReal::pos_inf() : ExtReal(lb));
    r.bound_rhs_from_lower = v.to_double();
  }
  r.exact_log_tail = tail_exact(f, t, p);
  r.gate_met = r.b_V.mean <= delta / kappa;
  r.asserted = r.gate_met && r.monotone_on_grid;
  r.holds = !(r.exact_log_tail > r.bound_rhs);
  return r;
}

Json to_json(const RateResult& r) {
  Json j;
  j["t"] = r.t;
  j["phi"] = json_number(r.phi);
  j["certified_upper"] = json_number(r.certified_upper);
  j["method"] = r.method;
  j["minimizer"] = r.minimizer ? Json(*r.minimizer) : Json(nullptr);
  j["lower_bound"] = r.lower_bound ? json_number(*r.lower_bound) : Json(nullptr);
  return j;
}

Json to_json(const NldReport& r) {
  Json j;
  j["t"] = r.t;
  j["delta"] = r.delta;
  j["p"] = r.p;
  j["n"] = r.n;
  j["C_used"] = r.C_used;
  j["kappa_used"] = r.kappa_used;
  j["phi_at_t_minus_delta"] = to_json(r.phi_at_t_minus_delta);
  j["b_V"] = to_json(r.b_V);
  j["L"] = r.L;
  j["L_upper_bound"] = r.L_upper_bound;
  j["log_term"] = json_number(r.log_term);
  j["bound_rhs"] = json_number(r.bound_rhs);
  j["bound_rhs_from_lower"] = r.bound_rhs_from_lower ? json_number(*r.bound_rhs_from_lower) : Json(nullptr);
  j["exact_log_tail"] = json_number(r.exact_log_tail);
  j["gate_met"] = r.gate_met;
  j["gate_failed"] = !r.gate_met;
  Json grid = Json::array();
  for (const auto& [s, phi] : r.s_grid) grid.push_back({{"s", s}, {"phi", json_number(phi)}});
  j["s_grid"] = grid;
  j["monotone_on_grid"] = r.monotone_on_grid;
  j["asserted"] = r.asserted;
  j["holds"] = r.holds;
  j["seed"] = r.seed;
  return j;
}

}  // namespace tilt

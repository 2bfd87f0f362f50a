#include "tilt/free_energy.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <stdexcept>

#include "tilt/parallel.hpp"
#include "tilt/rng.hpp"

namespace tilt {

namespace {

void check_dense(const Potential& f) {
  if (f.n() > kMaxDenseDim) throw std::invalid_argument("dimension exceeds the dense enumeration limit");
}

double log_reference(std::uint64_t state, int n, BernoulliParam p) {
  const int ups = std::popcount(state);
  return ups * p.log_p() + (n - ups) * p.log_q();
}

double sup_distance(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

struct StartOutcome {
  double value = -HUGE_VAL;
  std::vector<double> y;
  int iterations = 0;
  double residual = HUGE_VAL;
  bool converged = false;
  bool fallback = false;
};

// Best response of coordinate i: the functional is affine in y_i minus I_p(y_i).
double best_response(double partial, BernoulliParam p) { return std::tanh(partial + p.tilt0()); }

StartOutcome run_start(const Potential& f, BernoulliParam p, const MeanFieldConfig& c, std::vector<double> y) {
  const int n = f.n();
  StartOutcome out;
  double residual = HUGE_VAL;
  int it = 0;
  for (; it < c.max_iterations; ++it) {
    const auto g = f.gradient(y);
    residual = 0.0;
    for (int i = 0; i < n; ++i) {
      const double target = best_response(g[i], p);
      residual = std::max(residual, std::abs(target - y[i]));
      y[i] = std::clamp((1.0 - c.damping) * y[i] + c.damping * target, -1.0, 1.0);
    }
    if (residual <= c.tolerance) break;
  }
  out.converged = residual <= c.tolerance;
  if (!out.converged) {
    // Coordinate ascent never decreases the functional, so it settles where damping oscillates.
    out.fallback = true;
    for (int sweep = 0; sweep < c.max_iterations; ++sweep, ++it) {
      residual = 0.0;
      for (int i = 0; i < n; ++i) {
        const double target = best_response(f.gradient(y)[i], p);
        residual = std::max(residual, std::abs(target - y[i]));
        y[i] = target;
      }
      if (residual <= c.tolerance) break;
    }
    out.converged = residual <= c.tolerance;
  }
  out.value = meanfield_functional(f, p, y);
  out.y = std::move(y);
  out.iterations = it;
  out.residual = residual;
  return out;
}

}  // namespace

double exact_log_partition(const Potential& f, BernoulliParam p) {
  check_dense(f);
  const int n = f.n();
  const auto acc = chunked_reduce<LogSumExp>(
      std::uint64_t{1} << n,
      [&](std::uint64_t lo, std::uint64_t hi) {
        LogSumExp lse;
        if (lo >= hi) return lse;
        VertexWalker w(f, lo);
        for (std::uint64_t k = lo;; ++k) {
          lse.add(w.value() + log_reference(w.state(), n, p));
          if (k + 1 == hi) break;
          w.advance();
        }
        return lse;
      },
      LogSumExp::combine);
  return acc.value();
}

DenseDistribution gibbs_measure(const Potential& f, BernoulliParam p) {
  check_dense(f);
  const int n = f.n();
  std::vector<double> logw(std::size_t{1} << n);
  for (std::size_t s = 0; s < logw.size(); ++s) logw[s] = f.eval_vertex(s) + log_reference(s, n, p);
  return DenseDistribution::from_log_weights(n, logw);
}

double meanfield_functional(const Potential& f, BernoulliParam p, std::span<const double> y) {
  return f.eval(y) - rate_Ip_sum(y, p).to_double();
}

MeanFieldSolution meanfield_optimize(const Potential& f, BernoulliParam p, const MeanFieldConfig& config) {
  const int n = f.n();
  const int total = std::max(config.starts, 0) + 2;
  std::vector<std::vector<double>> inits(total, std::vector<double>(n, p.h0()));
  {
    // Gradient-sign start: push each spin towards the sign of its field at the reference mean.
    const auto g = f.gradient(inits[0]);
    for (int i = 0; i < n; ++i) inits[1][i] = g[i] >= 0 ? 0.9 : -0.9;
  }
  for (int k = 2; k < total; ++k) {
    CounterRng rng(config.seed, StreamTag::meanfield_start, static_cast<std::uint64_t>(k));
    for (auto& v : inits[k]) v = 2.0 * rng.uniform() - 1.0;
  }
  std::vector<StartOutcome> outcomes(total);
  parallel_for(total, [&](std::size_t k) { outcomes[k] = run_start(f, p, config, inits[k]); });

  MeanFieldSolution sol;
  sol.starts = total;
  std::size_t best = 0;
  for (std::size_t k = 1; k < outcomes.size(); ++k)
    if (outcomes[k].value > outcomes[best].value) best = k;
  std::vector<std::vector<double>> distinct;
  for (const auto& o : outcomes) {
    sol.fallback_used += o.fallback;
    if (std::none_of(distinct.begin(), distinct.end(), [&](const auto& d) { return sup_distance(d, o.y) < 1e-6; }))
      distinct.push_back(o.y);
  }
  sol.distinct_optima = static_cast<int>(distinct.size());
  sol.value = outcomes[best].value;
  sol.argmax = outcomes[best].y;
  sol.iterations = outcomes[best].iterations;
  sol.residual = outcomes[best].residual;
  sol.converged = outcomes[best].converged;
  return sol;
}

WidthEstimate potential_width(const Potential& f, WidthMode mode, std::uint64_t samples, std::uint64_t seed) {
  if (f.is_ising()) {
    const auto& is = f.as_ising();
    if (f.n() > kMaxExactWidthDim) mode = WidthMode::monte_carlo;
    return rademacher_width_ising(is.J, is.h, mode, samples, seed);
  }
  if (f.is_linear()) {
    WidthEstimate w;
    w.method = WidthMethod::closed_form;
    w.seed = seed;
    return w;
  }
  check_dense(f);
  const auto table = f.vertex_table();
  const auto grads = discrete_gradient_table(table, f.n());
  std::vector<std::vector<double>> V;
  V.reserve(table.size());
  for (std::size_t s = 0; s < table.size(); ++s)
    V.emplace_back(grads.begin() + s * f.n(), grads.begin() + (s + 1) * f.n());
  std::sort(V.begin(), V.end());
  V.erase(std::unique(V.begin(), V.end()), V.end());
  if (f.n() > kMaxExactWidthDim) mode = WidthMode::monte_carlo;
  return rademacher_width_finite(V, mode, samples, seed);
}

GapReport meanfield_gap_report(const Potential& f, BernoulliParam p, const GapConfig& config) {
  GapReport r;
  r.n = f.n();
  r.seed = config.meanfield.seed;
  r.log_z = exact_log_partition(f, p);
  r.solution = meanfield_optimize(f, p, config.meanfield);
  r.mf_value = r.solution.value;
  r.gap = r.log_z - r.mf_value;
  r.width = potential_width(f, config.width_mode, config.width_samples, config.meanfield.seed);
  if (r.width.mean > 0) r.ratio = r.gap / r.width.mean;
  if (f.is_ising()) r.hs_bound = std::sqrt(static_cast<double>(f.n())) * f.hs_norm();
  r.gibbs_ok = r.gap >= -1e-9;
  r.ratio_ok = r.gap <= config.ratio_cap * r.width.mean + 1e-9;
  return r;
}

Json to_json(const GapReport& r) {
  Json j;
  j["log_z"] = json_number(r.log_z);
  j["mf_value"] = json_number(r.mf_value);
  j["gap"] = json_number(r.gap);
  j["width"] = json_number(r.width.mean);
  j["width_ci"] = json_number(r.width.ci_half_width);
  j["width_method"] = to_string(r.width.method);
  j["ratio"] = json_optional(r.ratio);
  j["hs_bound"] = json_optional(r.hs_bound);
  j["n"] = r.n;
  j["seed"] = r.seed;
  j["gibbs_ok"] = r.gibbs_ok;
  j["ratio_ok"] = r.ratio_ok;
  j["optimizer"] = {{"starts", r.solution.starts},
                    {"iterations", r.solution.iterations},
                    {"residual", json_number(r.solution.residual)},
                    {"converged", r.solution.converged},
                    {"distinct_optima", r.solution.distinct_optima},
                    {"fallback_used", r.solution.fallback_used}};
  return j;
}

ExtReal gibbs_check(const Potential& f, const DenseDistribution& nu, BernoulliParam p) {
  if (nu.n() != f.n()) throw std::invalid_argument("gibbs_check: dimension mismatch");
  const ExtReal h = relative_entropy_to_reference(nu, p);
  if (!h.is_finite()) return ExtReal::pos_inf();
  double mean_f = 0.0;
  for (std::size_t s = 0; s < nu.size(); ++s)
    if (nu[s] > 0) mean_f += nu[s] * f.eval_vertex(s);
  return exact_log_partition(f, p) - (mean_f - h.value());
}

}  // namespace tilt

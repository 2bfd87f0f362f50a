#ifndef TILT_NLD_HPP
#define TILT_NLD_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tilt/core.hpp"
#include "tilt/potentials.hpp"
#include "tilt/report.hpp"
#include "tilt/width.hpp"

namespace tilt {

struct RateConfig {
  int starts = 8;
  // Grid step for n <= 3; 0 picks 1e-3 for n <= 2 and 1e-2 for n = 3.
  double grid_step = 0.0;
  double feas_tol = 1e-9;
  double opt_tol = 1e-6;
  std::uint64_t seed = 0;
};

struct RateResult {
  double t = 0.0;
  ExtReal phi = 0.0;
  std::optional<std::vector<double>> minimizer;
  std::string method;  // grid | penalty_optimizer | closed_form_1d
  ExtReal certified_upper = 0.0;
  // Rigorous lower bound from the grid scan (n <= 3 only).
  std::optional<double> lower_bound;
};

// phi_p(t) = inf { I_p(y) : f(y) >= t, y in [-1,1]^n }.
RateResult phi_p(const Potential& f, double t, BernoulliParam p, const RateConfig& config = {});
// The same at several levels, sharing the grid scan.
std::vector<RateResult> phi_p_many(const Potential& f, const std::vector<double>& ts, BernoulliParam p,
                                   const RateConfig& config = {});

// log mu_p^n(f(X) >= t) by enumeration; -inf when no vertex qualifies.
// Vertices within 1e-12 (relative) of t count as reaching it.
ExtReal tail_exact(const Potential& f, double t, BernoulliParam p);

struct NldConfig {
  RateConfig rate;
  int s_grid_points = 8;
  WidthMode width_mode = WidthMode::exact;
  std::uint64_t width_samples = kDefaultWidthSamples;
  std::uint64_t seed = 0;
};

struct NldReport {
  double t = 0.0, delta = 0.0, p = 0.5;
  int n = 0;
  double C_used = 1.0, kappa_used = 1.0;
  RateResult phi_at_t_minus_delta;
  WidthEstimate b_V;
  double L = 0.0;
  double L_upper_bound = 0.0;
  double log_term = 0.0;  // log(n L log(1/(p(1-p))) / delta)
  ExtReal bound_rhs = 0.0;
  std::optional<double> bound_rhs_from_lower;  // same with the grid lower bound of phi
  ExtReal exact_log_tail = 0.0;
  bool gate_met = false;
  std::vector<std::pair<double, ExtReal>> s_grid;
  bool monotone_on_grid = false;
  bool asserted = false;  // gate met and the increase hypothesis holds on the grid
  bool holds = true;      // exact_log_tail <= bound_rhs (meaningful when asserted)
  std::uint64_t seed = 0;
};

NldReport nld_report(const Potential& f, double t, double delta, BernoulliParam p, double C = 1.0,
                     double kappa = 1.0, const NldConfig& config = {});

Json to_json(const RateResult& r);
Json to_json(const NldReport& r);

}  // namespace tilt

#endif

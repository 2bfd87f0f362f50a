#ifndef TILT_FREE_ENERGY_HPP
#define TILT_FREE_ENERGY_HPP

#include <cstdint>
#include <optional>
#include <vector>

#include "tilt/core.hpp"
#include "tilt/potentials.hpp"
#include "tilt/report.hpp"
#include "tilt/width.hpp"

namespace tilt {

// log sum_x mu_p^n(x) e^{f(x)} by streaming log-sum-exp over all vertices.
double exact_log_partition(const Potential& f, BernoulliParam p = BernoulliParam{});

// The Gibbs measure e^f mu_p^n / Z.
DenseDistribution gibbs_measure(const Potential& f, BernoulliParam p = BernoulliParam{});

// f(y) - sum_i I_p(y_i): the product-measure value of the Gibbs functional.
double meanfield_functional(const Potential& f, BernoulliParam p, std::span<const double> y);

struct MeanFieldConfig {
  int starts = 32;  // random starts, on top of the two deterministic ones
  double damping = 0.5;
  int max_iterations = 10000;
  double tolerance = 1e-10;
  std::uint64_t seed = 0;
};

struct MeanFieldSolution {
  double value = 0.0;
  std::vector<double> argmax;
  int iterations = 0;      // of the best start
  double residual = 0.0;   // sup-norm fixed-point residual of the best start
  bool converged = false;
  int distinct_optima = 0;
  int starts = 0;
  int fallback_used = 0;   // number of starts that needed coordinate ascent
};

// sup_y f(y) - sum I_p(y_i) by damped fixed-point iteration y <- Lambda_p'(grad f(y)),
// with Gauss-Seidel coordinate ascent when the damped iteration stalls.
MeanFieldSolution meanfield_optimize(const Potential& f, BernoulliParam p, const MeanFieldConfig& config);

struct GapConfig {
  MeanFieldConfig meanfield;
  WidthMode width_mode = WidthMode::exact;
  std::uint64_t width_samples = kDefaultWidthSamples;
  double ratio_cap = 8.0;
};

struct GapReport {
  double log_z = 0.0;
  double mf_value = 0.0;
  double gap = 0.0;
  WidthEstimate width;
  std::optional<double> ratio;     // gap / width, absent when width is 0
  std::optional<double> hs_bound;  // sqrt(n) ||J||_2 for Ising
  int n = 0;
  std::uint64_t seed = 0;
  bool gibbs_ok = true;        // gap >= -1e-9
  bool ratio_ok = true;        // gap <= ratio_cap * width (+1e-9)
  MeanFieldSolution solution;
};

// b(grad f([-1,1]^n)): closed form for Ising, zero for linear potentials, and
// the vertex discrete-gradient set otherwise (<grad f(y), eps> is multilinear in y).
WidthEstimate potential_width(const Potential& f, WidthMode mode, std::uint64_t samples, std::uint64_t seed);

GapReport meanfield_gap_report(const Potential& f, BernoulliParam p, const GapConfig& config);
Json to_json(const GapReport& r);

// log Z - (int f dnu - H(nu | mu_p^n)); +inf when the entropy is infinite.
ExtReal gibbs_check(const Potential& f, const DenseDistribution& nu, BernoulliParam p = BernoulliParam{});

}  // namespace tilt

#endif

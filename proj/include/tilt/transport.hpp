#ifndef TILT_TRANSPORT_HPP
#define TILT_TRANSPORT_HPP

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "tilt/core.hpp"
#include "tilt/network_simplex.hpp"
#include "tilt/report.hpp"

namespace tilt {

// w_p(x, u) = 2 |I_p'(u)| 1{x (h0 - u) < 0}; +inf at u = +-1 when active.
ExtReal w_p_cost(int x, double u, BernoulliParam p);
// Sum over coordinates.
ExtReal w_p_cost(std::span<const double> x, std::span<const double> u, BernoulliParam p);

// Cost of the coupling (U, sg(h - U)), U uniform on [-1,1], sg(0) = 1:
// the path integral |int_{h0}^{h} I_p'| = I_p(h).
double explicit_coupling_cost(double h, BernoulliParam p);
// Same quantity by adaptive quadrature of w_p along the coupling.
double explicit_coupling_cost_quadrature(double h, BernoulliParam p);

// E max_x {t x - w_p(x, U)} by the two-case closed form.
double dual_Yt_mean(double t, BernoulliParam p);
// Same by quadrature of the pointwise maximum.
double dual_Yt_mean_quadrature(double t, BernoulliParam p);

// y Lambda*(x / y), +inf unless x, y > 0. x is the source (nu) side.
ExtReal exp_cost(double x, double y);
ExtReal exp_cost(std::span<const double> x, std::span<const double> y);

// Midpoint atoms u_j = -1 + (2j - 1)/m, j = 1..m.
std::vector<double> midpoint_grid(int m);

enum class CostKind { w_p, exp, matrix };

struct TransportProblem {
  std::vector<std::vector<double>> source_atoms;  // may be empty for CostKind::matrix
  std::vector<double> source_weights;
  std::vector<std::vector<double>> target_atoms;
  std::vector<double> target_weights;
  CostKind kind = CostKind::matrix;
  double p = 0.5;             // for w_p
  std::vector<double> cost;   // row-major, for CostKind::matrix; +inf allowed

  // Row-major cost matrix (cost rows assembled concurrently).
  std::vector<double> cost_matrix() const;
  void validate() const;
};

struct TransportPlan {
  std::vector<PlanEntry> entries;
  double primal = 0.0;
  double dual = 0.0;
  double duality_gap = 0.0;  // primal - dual
  std::vector<double> source_potential;
  std::vector<double> target_potential;
  double cs_residual = 0.0;
  double marginal_error = 0.0;  // max row/column deviation
  std::uint64_t pivots = 0;
};

// Optimal coupling by network simplex; throws InfeasibleTransport when every
// coupling has infinite cost.
TransportPlan solve_ot(const TransportProblem& problem);

TransportProblem transport_problem_from_json(const Json& j);
Json to_json(const TransportProblem& problem);
Json to_json(const TransportPlan& plan, bool include_entries = true);

// Exact optimal transport from nu on {-1,1}^n (n = 1 or 2) to the product of
// m-point midpoint grids with cost w_p. Exploits that, per target coordinate,
// the cost is g(u) for one source spin and 0 for the other: the dual function
// of the source potentials is evaluated in O(m log m), maximized by Newton's
// method, and the final plan is built and certified in one pass over targets.
// Small grids (at most 20000 arcs) go to the network simplex instead.
struct GridTransportResult {
  double primal = 0.0;  // cost of an explicit feasible plan
  double dual = 0.0;    // dual objective at the final potentials (lower bound)
  double duality_gap = 0.0;
  std::vector<double> source_potential;
  double marginal_error = 0.0;  // of the explicit plan
  int iterations = 0;
  double moved_mass = 0.0;  // mass reassigned by the final repair step
  // Certified upper bound on the optimal dual value (ellipsoid runs only).
  double dual_upper_bound = HUGE_VAL;
  int n = 0;
  int m = 0;
};
GridTransportResult solve_w_p_grid(const DenseDistribution& nu, BernoulliParam p, int m);

// The same discretized problem as a TransportProblem (m^n targets).
TransportProblem w_p_grid_problem(const DenseDistribution& nu, BernoulliParam p, int m);

enum class TranspoMode { lp, product_analytic };

// W_{w_p}(nu, U^n) <= H(nu | mu_p^n), with equality for product nu.
struct TranspoConfig {
  int grid = 2000;
  double tolerance = 2e-3;
  TranspoMode mode = TranspoMode::lp;
};
InequalityReport check_transpo_bernoulli(const DenseDistribution& nu, BernoulliParam p, const TranspoConfig& config);

// Whether nu equals the product of its marginals (within 1e-12).
bool is_product(const DenseDistribution& nu);

// A law on (0, inf) with density and quantile.
struct HalfLineLaw {
  std::string name;
  std::function<double(double)> density;
  std::function<double(double)> quantile;
  std::function<double(double)> log_density;  // optional; derived from density when empty
  std::function<double(double)> upper_quantile;  // Q(1 - q), accurate for small q
};
HalfLineLaw exponential_tilt_law(double lambda);  // density e^{-x/lambda} / lambda
HalfLineLaw gamma_law(double shape, double scale);

// H(nu | eta) for eta the standard exponential, by quadrature.
double entropy_vs_exponential(const HalfLineLaw& nu);
// Continuum monotone-coupling cost int c(Q_nu(F_eta(y)), y) deta(y), evaluated in
// log coordinates: c(e^z, e^w) = e^z - e^w - e^w (z - w).
double monotone_exp_cost(const HalfLineLaw& nu);
struct ExpLpResult {
  double lp = 0.0;
  double monotone = 0.0;  // discrete monotone pairing of the same atoms
  double duality_gap = 0.0;
  int atoms = 0;
};
// Discretize nu and eta at the `atoms` quantile midpoints and solve the LP.
ExpLpResult exp_lp(const HalfLineLaw& nu, int atoms);

// eta_lambda onto eta by x -> x / lambda: cost = Lambda*(lambda) = H(eta_lambda | eta).
InequalityReport check_transpoexp_tilt(double lambda, int lp_atoms = 400);
InequalityReport check_transpoexp_general(const HalfLineLaw& nu, int lp_atoms = 400, double tolerance = 1e-3);

}  // namespace tilt

#endif

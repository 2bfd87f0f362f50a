#ifndef TILT_NETWORK_SIMPLEX_HPP
#define TILT_NETWORK_SIMPLEX_HPP

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace tilt {

struct InfeasibleTransport : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// One positive entry of a coupling.
struct PlanEntry {
  int source;
  int target;
  double mass;
};

struct NetworkSimplexResult {
  std::vector<PlanEntry> plan;
  double primal = 0.0;
  std::vector<double> source_potential;  // phi
  std::vector<double> target_potential;  // psi = min_i c(i,.) - phi_i
  double dual = 0.0;
  double cs_residual = 0.0;  // max |c - phi - psi| over the support of the plan
  std::uint64_t pivots = 0;
};

// Transportation problem min sum c_ij pi_ij over couplings of (supply, demand),
// cost row-major (supply.size() x demand.size()); +inf marks a forbidden arc.
// Primal network simplex on a strongly feasible spanning tree: phase 1 prices
// artificial root arcs lexicographically ahead of the real cost, phase 2
// freezes them so the final node potentials are optimal duals.
NetworkSimplexResult network_simplex(std::span<const double> supply, std::span<const double> demand,
                                     std::span<const double> cost);

}  // namespace tilt

#endif

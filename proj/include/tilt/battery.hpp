#ifndef TILT_BATTERY_HPP
#define TILT_BATTERY_HPP

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "tilt/potentials.hpp"
#include "tilt/report.hpp"
#include "tilt/rng.hpp"

namespace tilt {

// Symmetric Gaussian couplings with zero diagonal, rescaled to ||J||_2 = hs_norm.
Eigen::MatrixXd random_couplings(int n, double hs_norm, CounterRng& rng);

struct BatteryConfig {
  std::uint64_t seed = 7;
  int transport_grid = 2000;
  int product_measures = 50;
  int nonproduct_measures = 200;
  int exp_lp_atoms = 400;
  int ising_instances = 100;
  int ising_n = 12;
  int tilt_instances = 20;
  int strongint_sets = 200;
  int intexpo_mc_instances = 4;
  std::uint64_t intexpo_samples = 1000000;
  int nld_linear = 10;
  int nld_ising = 12;
  int logsob_instances = 500;
  int logsob_tilts = 50;
};

struct CriterionResult {
  int id = 0;
  std::string name;
  bool passed = false;
  Json summary;
  double seconds = 0.0;  // wall clock, kept out of the JSON
};

inline constexpr int kBatteryCriteria = 9;

CriterionResult run_criterion(int id, const BatteryConfig& config);
// Criteria 1..9 in order; `progress` sees each result as it completes.
std::vector<CriterionResult> run_battery(const BatteryConfig& config,
                                         const std::function<void(const CriterionResult&)>& progress = {});

Json to_json(const CriterionResult& r);
// Summary table and empirical constants per criterion.
Json battery_json(const std::vector<CriterionResult>& results);

}  // namespace tilt

#endif

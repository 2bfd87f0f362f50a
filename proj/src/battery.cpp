#include "tilt/battery.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

#include "tilt/free_energy.hpp"
#include "tilt/integrability.hpp"
#include "tilt/logsob.hpp"
#include "tilt/nld.hpp"
#include "tilt/transport.hpp"
#include "tilt/width.hpp"

namespace tilt {

namespace {

constexpr double kPs[3] = {0.3, 0.5, 0.7};

CounterRng stream(const BatteryConfig& c, int criterion, std::uint64_t instance) {
  return CounterRng(c.seed, StreamTag::battery, (static_cast<std::uint64_t>(criterion) << 32) | instance);
}

double uniform(CounterRng& rng, double lo, double hi) { return lo + (hi - lo) * rng.uniform(); }
int uniform_int(CounterRng& rng, int lo, int hi) {
  return lo + static_cast<int>(std::floor(rng.uniform() * (hi - lo + 1)));
}

struct MaxTracker {
  double value = -HUGE_VAL;
  void add(double v) { value = std::max(value, v); }
  Json json() const { return json_number(value); }
};

// 1. Closed-form and quadrature dual means against Lambda_p.
CriterionResult dual_identity(const BatteryConfig&) {
  CriterionResult r;
  r.id = 1;
  r.name = "dual_identity";
  MaxTracker cf, quad;
  for (int i = 0; i < 10; ++i)
    for (int j = 0; j < 10; ++j) {
      const double t = -5.0 + 10.0 * i / 9.0;
      const BernoulliParam p(0.05 + 0.1 * j);
      const double L = log_laplace_bernoulli(t, p);
      cf.add(std::abs(dual_Yt_mean(t, p) - L));
      quad.add(std::abs(dual_Yt_mean_quadrature(t, p) - L));
    }
  r.passed = cf.value <= 1e-10 && quad.value <= 1e-10;
  r.summary = {{"points", 100}, {"max_error_closed_form", cf.json()}, {"max_error_quadrature", quad.json()},
               {"tolerance", 1e-10}};
  return r;
}

// 2. Grid transport for Bernoulli: equality for products, inequality otherwise.
CriterionResult bernoulli_transport(const BatteryConfig& c) {
  CriterionResult r;
  r.id = 2;
  r.name = "bernoulli_transport";
  TranspoConfig tc;
  tc.grid = c.transport_grid;
  const double tol = tc.tolerance;
  MaxTracker dev_product, excess, dual_gap;
  double min_slack = HUGE_VAL;
  bool ok = true;
  int nonproduct_seen = 0;
  for (int k = 0; k < c.product_measures; ++k) {
    auto rng = stream(c, 2, k);
    const BernoulliParam p(kPs[k % 3]);
    const std::vector<double> y{uniform(rng, -0.9, 0.9), uniform(rng, -0.9, 0.9)};
    const auto nu = ProductMeasure(y, p).materialize();
    const auto rep = check_transpo_bernoulli(nu, p, tc);
    dev_product.add(std::abs(rep.lhs - rep.rhs));
    dual_gap.add(std::abs(rep.details["duality_gap"].get<double>()));
    ok = ok && std::abs(rep.lhs - rep.rhs) <= tol;
  }
  for (int k = 0; k < c.nonproduct_measures; ++k) {
    auto rng = stream(c, 2, 100000 + k);
    const BernoulliParam p(kPs[k % 3]);
    std::vector<double> w(4);
    for (auto& v : w) v = rng.exponential();
    const auto nu = DenseDistribution::from_weights(2, w);
    nonproduct_seen += !is_product(nu);
    const auto rep = check_transpo_bernoulli(nu, p, tc);
    excess.add(rep.lhs - rep.rhs);
    min_slack = std::min(min_slack, rep.rhs - rep.lhs);
    dual_gap.add(std::abs(rep.details["duality_gap"].get<double>()));
    ok = ok && rep.lhs <= rep.rhs + tol;
  }
  r.passed = ok;
  r.summary = {{"grid", c.transport_grid},
               {"product_measures", c.product_measures},
               {"nonproduct_measures", c.nonproduct_measures},
               {"nonproduct_confirmed", nonproduct_seen},
               {"max_abs_deviation_product", dev_product.json()},
               {"max_excess_nonproduct", excess.json()},
               {"min_slack_nonproduct", json_number(min_slack)},
               {"max_duality_gap", dual_gap.json()},
               {"tolerance", tol}};
  return r;
}

// 3. Exponential tilts: explicit coupling equals Lambda*, LP agrees.
CriterionResult exponential_transport(const BatteryConfig& c) {
  CriterionResult r;
  r.id = 3;
  r.name = "exponential_transport";
  bool ok = true;
  Json rows = Json::array();
  for (double lambda : {0.25, 0.5, 1.0, 2.0, 4.0}) {
    const auto rep = check_transpoexp_tilt(lambda, c.exp_lp_atoms);
    ok = ok && rep.holds;
    rows.push_back({{"lambda", lambda},
                    {"closed_form", rep.details["closed_form"]},
                    {"coupling", json_number(rep.lhs)},
                    {"lp", rep.details["lp"]},
                    {"holds", rep.holds}});
  }
  r.passed = ok;
  r.summary = {{"instances", rows}, {"lp_atoms", c.exp_lp_atoms}, {"coupling_tolerance", 1e-8}, {"lp_tolerance", 1e-2}};
  return r;
}

struct IsingRun {
  double hs;
  GapReport report;
};

std::vector<IsingRun> ising_instances(const BatteryConfig& c) {
  std::vector<IsingRun> runs;
  for (int k = 0; k < c.ising_instances; ++k) {
    auto rng = stream(c, 4, k);
    const double hs = c.ising_instances > 1 ? 0.1 + 2.9 * k / (c.ising_instances - 1) : 1.0;
    const auto f = Potential::ising(random_couplings(c.ising_n, hs, rng));
    GapConfig gc;
    gc.meanfield.seed = c.seed + k;
    runs.push_back({hs, meanfield_gap_report(f, BernoulliParam{}, gc)});
  }
  return runs;
}

// 4. Gibbs sandwich on random Ising models, and tilts.
CriterionResult gibbs_sandwich(const BatteryConfig& c, const std::vector<IsingRun>& runs) {
  CriterionResult r;
  r.id = 4;
  r.name = "gibbs_sandwich";
  bool lower = true, upper = true, tilts = true;
  MaxTracker ratio, tilt_gap;
  double min_gap = HUGE_VAL;
  for (const auto& run : runs) {
    const auto& g = run.report;
    lower = lower && g.mf_value <= g.log_z + 1e-9;
    upper = upper && g.gap <= 8.0 * g.width.mean + 1e-9;
    min_gap = std::min(min_gap, g.gap);
    if (g.ratio) ratio.add(*g.ratio);
  }
  for (int k = 0; k < c.tilt_instances; ++k) {
    auto rng = stream(c, 4, 1000 + k);
    const int n = uniform_int(rng, 1, c.ising_n);
    Eigen::VectorXd a(n);
    for (int i = 0; i < n; ++i) a[i] = 1.5 * rng.normal();
    GapConfig gc;
    gc.meanfield.seed = c.seed + k;
    const auto g = meanfield_gap_report(Potential::linear(a), BernoulliParam(kPs[k % 3]), gc);
    tilt_gap.add(std::abs(g.gap));
    tilts = tilts && std::abs(g.gap) <= 1e-6;
  }
  r.passed = lower && upper && tilts;
  r.summary = {{"instances", runs.size()},     {"n", c.ising_n},          {"lower_bound_holds", lower},
               {"upper_bound_holds", upper},   {"ratio_cap", 8.0},        {"max_ratio", ratio.json()},
               {"min_gap", json_number(min_gap)}, {"tilt_instances", c.tilt_instances},
               {"max_tilt_gap", tilt_gap.json()}, {"tilts_hold", tilts}};
  return r;
}

// 5. b(V) <= 2 sqrt(n) ||J||_2 on the same instances, plus the gap curve.
CriterionResult ising_scaling(const BatteryConfig& c, const std::vector<IsingRun>& runs) {
  CriterionResult r;
  r.id = 5;
  r.name = "ising_width_scaling";
  bool ok = true;
  MaxTracker ratio;
  Json curve = Json::array();
  for (const auto& run : runs) {
    const auto& g = run.report;
    const double bound = 2.0 * std::sqrt(static_cast<double>(c.ising_n)) * run.hs;
    ok = ok && g.width.mean <= bound;
    ratio.add(g.width.mean / bound);
    curve.push_back({{"hs_norm", run.hs}, {"gap", g.gap}, {"width", g.width.mean}, {"bound", bound}});
  }
  r.passed = ok;
  r.summary = {{"instances", runs.size()}, {"max_width_over_bound", ratio.json()}, {"gap_vs_hs_norm", curve}};
  return r;
}

// 6. Strong integrability for Bernoulli processes.
CriterionResult strong_integrability(const BatteryConfig& c) {
  CriterionResult r;
  r.id = 6;
  r.name = "strong_integrability";
  bool ok = true, singletons_ok = true;
  MaxTracker ratio, singleton_abs;
  double min_lhs = HUGE_VAL;
  int counts[4] = {0, 0, 0, 0};
  StrongIntConfig sc;
  sc.seed = c.seed;
  for (int k = 0; k < c.strongint_sets; ++k) {
    auto rng = stream(c, 6, k);
    const int kind = k % 5 == 0 ? 0 : k % 5 == 1 ? 1 : k % 5 == 2 ? 2 : 3;
    std::vector<std::vector<double>> V;
    if (kind == 0) {
      const int n = uniform_int(rng, 1, 16);
      std::vector<double> v(n);
      for (auto& x : v) x = 2.0 * rng.normal();
      V.push_back(v);
    } else if (kind == 1) {
      const int n = uniform_int(rng, 1, 16);
      const double rad = uniform(rng, 0.2, 3.0);
      for (int i = 0; i < n; ++i)
        for (double s : {1.0, -1.0}) {
          std::vector<double> v(n, 0.0);
          v[i] = s * rad;
          V.push_back(v);
        }
    } else if (kind == 2) {
      const int n = uniform_int(rng, 2, 10);
      const Eigen::MatrixXd J = random_couplings(n, uniform(rng, 0.1, 3.0), rng);
      Eigen::VectorXd h(n);
      for (int i = 0; i < n; ++i) h[i] = 0.5 * rng.normal();
      for (std::uint64_t s = 0; s < (std::uint64_t{1} << n); ++s) {
        Eigen::VectorXd x(n);
        for (int i = 0; i < n; ++i) x[i] = spin(s, i);
        const Eigen::VectorXd g = 2.0 * J * x + h;
        V.emplace_back(g.data(), g.data() + n);
      }
    } else {
      const int n = uniform_int(rng, 1, 16);
      const int m = uniform_int(rng, 2, 40);
      const double scale = uniform(rng, 0.1, 2.0);
      for (int j = 0; j < m; ++j) {
        std::vector<double> v(n);
        for (auto& x : v) x = scale * rng.normal();
        V.push_back(v);
      }
    }
    ++counts[kind];
    const auto rep = check_strongintB(V, BernoulliParam{}, sc);
    ok = ok && rep.holds;
    min_lhs = std::min(min_lhs, rep.lhs);
    if (rep.ratio) ratio.add(*rep.ratio);
    if (kind == 0) {
      singleton_abs.add(std::abs(rep.lhs));
      singletons_ok = singletons_ok && std::abs(rep.lhs) <= 1e-12;
    }
  }
  r.passed = ok && singletons_ok;
  r.summary = {{"sets", c.strongint_sets},
               {"singletons", counts[0]},
               {"axis_crosses", counts[1]},
               {"ising_gradient_sets", counts[2]},
               {"random_clouds", counts[3]},
               {"min_lhs", json_number(min_lhs)},
               {"max_ratio", ratio.json()},
               {"ratio_cap", 8.0},
               {"max_singleton_abs_lhs", singleton_abs.json()}};
  return r;
}

// 7. Exponential integrability (and the Gaussian baseline, logged).
CriterionResult exponential_integrability(const BatteryConfig& c) {
  CriterionResult r;
  r.id = 7;
  r.name = "exponential_integrability";
  bool ok = true;
  Json quadrature = Json::array(), mc = Json::array(), gaussian = Json::array();
  const std::vector<std::vector<double>> sets1d{{0.5, -1.0}, {0.3}, {0.9, -2.0, 0.1}, {-0.5, 0.5}, {0.99, -5.0},
                                                {0.2, 0.4, 0.6, 0.8}, {-3.0, -1.0, 0.0}};
  for (const auto& V : sets1d) {
    const auto rep = check_intexpo_1d(V);
    ok = ok && rep.holds;
    quadrature.push_back({{"V", V}, {"lhs", rep.lhs}, {"rhs", rep.rhs}, {"holds", rep.holds}});
  }
  for (int k = 0; k < c.intexpo_mc_instances; ++k) {
    auto rng = stream(c, 7, k);
    std::vector<std::vector<double>> V(20, std::vector<double>(5));
    for (auto& v : V)
      for (auto& x : v) x = uniform(rng, -1.0, 0.8);
    const auto rep = check_intexpo(V, c.intexpo_samples, c.seed + k);
    ok = ok && rep.holds;
    mc.push_back({{"lhs", rep.lhs},
                  {"rhs", rep.rhs},
                  {"three_sigma", rep.tolerance},
                  {"reliable", rep.details["reliable"]},
                  {"holds", rep.holds}});
  }
  {
    const auto rep = check_strongG_1d({1.0, -1.0});
    gaussian.push_back({{"instance", "pm_e1_quadrature"}, {"lhs", rep.lhs}, {"rhs", rep.rhs}, {"holds", rep.holds}});
    auto rng = stream(c, 7, 1000);
    std::vector<std::vector<double>> V(30, std::vector<double>(8));
    for (auto& v : V) {
      double norm = 0.0;
      for (auto& x : v) {
        x = rng.normal();
        norm += x * x;
      }
      for (auto& x : v) x /= std::sqrt(norm);
    }
    const auto mrep = check_strongG(V, c.intexpo_samples / 4, c.seed);
    gaussian.push_back({{"instance", "unit_vectors_mc"}, {"lhs", mrep.lhs}, {"rhs", mrep.rhs}, {"holds", mrep.holds}});
  }
  r.passed = ok;
  r.summary = {{"quadrature_instances", quadrature},
               {"quadrature_tolerance", 1e-8},
               {"monte_carlo_instances", mc},
               {"samples", c.intexpo_samples},
               {"gaussian_baseline", gaussian}};
  return r;
}

// 8. Nonlinear large deviations on linear and Ising potentials.
CriterionResult nonlinear_ld(const BatteryConfig& c) {
  CriterionResult r;
  r.id = 8;
  r.name = "nonlinear_large_deviations";
  bool ok = true;
  Json rows = Json::array();
  MaxTracker tightest;  // largest exact_log_tail - bound_rhs (most negative is slack)
  NldConfig nc;
  nc.seed = c.seed;
  auto record = [&](const std::string& kind, const NldReport& rep, const Json& extra) {
    const bool pass = rep.gate_met && rep.monotone_on_grid && rep.holds;
    ok = ok && pass;
    tightest.add(rep.exact_log_tail.to_double() - rep.bound_rhs.to_double());
    Json row{{"kind", kind},
             {"n", rep.n},
             {"p", rep.p},
             {"t", rep.t},
             {"delta", rep.delta},
             {"b_V", rep.b_V.mean},
             {"L", rep.L},
             {"phi_t_minus_delta", json_number(rep.phi_at_t_minus_delta.phi)},
             {"exact_log_tail", json_number(rep.exact_log_tail)},
             {"bound_rhs", json_number(rep.bound_rhs)},
             {"gate_met", rep.gate_met},
             {"monotone_on_grid", rep.monotone_on_grid},
             {"holds", rep.holds}};
    row.update(extra);
    rows.push_back(row);
  };
  for (int k = 0; k < c.nld_linear; ++k) {
    auto rng = stream(c, 8, k);
    const int n = uniform_int(rng, 1, 12);
    const BernoulliParam p(kPs[k % 3]);
    Eigen::VectorXd a(n);
    for (int i = 0; i < n; ++i) a[i] = rng.normal();
    const double l1 = a.cwiseAbs().sum(), f0 = p.h0() * a.sum();
    const double delta = 0.1 * l1;
    const double t = f0 + delta + uniform(rng, 0.1, 0.9) * (l1 - f0 - delta);
    const auto f = Potential::linear(a);
    const auto rep = nld_report(f, t, delta, p, 1.0, 1.0, nc);
    // Chernoff: the exact tail never exceeds -phi_p(t) for a linear potential.
    const auto at_t = phi_p(f, t, p, nc.rate);
    const bool chernoff = !(rep.exact_log_tail > -at_t.phi + ExtReal(1e-9));
    record("linear", rep, {{"chernoff_holds", chernoff}});
  }
  int made = 0;
  for (std::uint64_t k = 0; made < c.nld_ising && k < 1000; ++k) {
    auto rng = stream(c, 8, 1000 + k);
    const int n = made < 2 ? 2 + made : uniform_int(rng, 4, 12);
    const BernoulliParam p(kPs[made % 3]);
    const Eigen::MatrixXd J = random_couplings(n, uniform(rng, 0.1, 0.5), rng);
    Eigen::VectorXd h(n);
    for (int i = 0; i < n; ++i) h[i] = rng.normal();
    const auto f = Potential::ising(J, h);
    const double b = potential_width(f, WidthMode::exact, kDefaultWidthSamples, c.seed).mean;
    const double delta = 1.05 * b;
    const double f0 = f.eval(std::vector<double>(n, p.h0()));
    const auto table = f.vertex_table();
    const double fmax = *std::max_element(table.begin(), table.end());
    if (!(fmax - f0 > 1.5 * delta)) continue;  // no admissible level: resample
    const double t = f0 + delta + uniform(rng, 0.1, 0.9) * (fmax - f0 - delta);
    const auto rep = nld_report(f, t, delta, p, 1.0, 1.0, nc);
    record("ising", rep,
           {{"hs_norm", J.norm()},
            {"bound_rhs_from_lower", rep.bound_rhs_from_lower ? json_number(*rep.bound_rhs_from_lower) : Json(nullptr)},
            {"method", rep.phi_at_t_minus_delta.method}});
    ++made;
  }
  ok = ok && made == c.nld_ising;
  r.passed = ok;
  r.summary = {{"instances", rows}, {"C", 1.0}, {"kappa", 1.0}, {"max_tail_minus_bound", tightest.json()}};
  return r;
}

// 9. Log-Sobolev chain, identity and reverse inequality.
CriterionResult log_sobolev(const BatteryConfig& c) {
  CriterionResult r;
  r.id = 9;
  r.name = "log_sobolev";
  bool identity = true, chain = true, reverse = true, tilts = true;
  MaxTracker residual, kappa, tilt_dev;
  LogSobConfig lc;
  lc.seed = c.seed;
  for (int k = 0; k < c.logsob_instances; ++k) {
    auto rng = stream(c, 9, k);
    const int n = 2 + k % 11;
    std::vector<double> table(std::size_t{1} << n);
    if (k % 5 == 4 && n <= 10) {
      const auto f = Potential::ising(random_couplings(n, uniform(rng, 0.1, 2.0), rng));
      table = f.vertex_table();
    } else {
      const double scale = uniform(rng, 0.1, 3.0);
      for (auto& v : table) v = scale * rng.normal();
    }
    const GibbsOnCube g(n, std::move(table));
    const auto rep = check_logsob_pair(g, lc);
    const double res = rep.details["identity_residual"].get<double>();
    residual.add(res);
    identity = identity && res <= 1e-10;
    chain = chain && rep.details["improved_inequality_holds"].get<bool>() &&
            rep.details["classical_bound_holds"].get<bool>();
    reverse = reverse && rep.lhs <= rep.rhs + 1e-10;
    if (rep.ratio) kappa.add(*rep.ratio);
  }
  for (int k = 0; k < c.logsob_tilts; ++k) {
    auto rng = stream(c, 9, 10000 + k);
    const int n = uniform_int(rng, 1, 12);
    std::vector<double> a(n);
    for (auto& v : a) v = 2.0 * rng.normal();
    const auto g = GibbsOnCube::tilt(a);
    const double H = relative_entropy_to_reference(g.nu(), BernoulliParam{}).to_double();
    const double dev = std::abs(logsob_functional(g) - H);
    tilt_dev.add(dev);
    tilts = tilts && dev <= 1e-10;
  }
  r.passed = identity && chain && reverse && tilts;
  r.summary = {{"instances", c.logsob_instances},
               {"max_identity_residual", residual.json()},
               {"identity_holds", identity},
               {"chain_holds", chain},
               {"reverse_holds", reverse},
               {"ratio_cap", 8.0},
               {"max_empirical_kappa", kappa.json()},
               {"tilt_instances", c.logsob_tilts},
               {"max_tilt_deviation", tilt_dev.json()},
               {"tilts_saturate", tilts}};
  return r;
}

template <class Fn>
CriterionResult timed(Fn&& fn) {
  const auto start = std::chrono::steady_clock::now();
  CriterionResult r = fn();
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

}  // namespace

Eigen::MatrixXd random_couplings(int n, double hs_norm, CounterRng& rng) {
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) J(i, j) = J(j, i) = rng.normal();
  const double norm = J.norm();
  if (norm > 0) J *= hs_norm / norm;
  return J;
}

CriterionResult run_criterion(int id, const BatteryConfig& config) {
  switch (id) {
    case 1: return timed([&] { return dual_identity(config); });
    case 2: return timed([&] { return bernoulli_transport(config); });
    case 3: return timed([&] { return exponential_transport(config); });
    case 4: return timed([&] { return gibbs_sandwich(config, ising_instances(config)); });
    case 5: return timed([&] { return ising_scaling(config, ising_instances(config)); });
    case 6: return timed([&] { return strong_integrability(config); });
    case 7: return timed([&] { return exponential_integrability(config); });
    case 8: return timed([&] { return nonlinear_ld(config); });
    case 9: return timed([&] { return log_sobolev(config); });
    default: throw std::invalid_argument("run_criterion: unknown criterion " + std::to_string(id));
  }
}

std::vector<CriterionResult> run_battery(const BatteryConfig& config,
                                         const std::function<void(const CriterionResult&)>& progress) {
  std::vector<CriterionResult> out;
  auto push = [&](CriterionResult r) {
    if (progress) progress(r);
    out.push_back(std::move(r));
  };
  for (int id = 1; id <= 3; ++id) push(run_criterion(id, config));
  // Criteria 4 and 5 share their Ising instances.
  const auto start = std::chrono::steady_clock::now();
  const auto runs = ising_instances(config);
  const double shared = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  auto sandwich = timed([&] { return gibbs_sandwich(config, runs); });
  sandwich.seconds += shared;
  push(std::move(sandwich));
  push(timed([&] { return ising_scaling(config, runs); }));
  for (int id = 6; id <= kBatteryCriteria; ++id) push(run_criterion(id, config));
  return out;
}

Json to_json(const CriterionResult& r) {
  return {{"id", r.id}, {"name", r.name}, {"passed", r.passed}, {"summary", r.summary}};
}

Json battery_json(const std::vector<CriterionResult>& results) {
  Json table = Json::array();
  bool all = true;
  for (const auto& r : results) {
    table.push_back(to_json(r));
    all = all && r.passed;
  }
  Json constants;
  for (const auto& r : results) {
    if (r.id == 4) constants["meanfield_gap_over_width_max"] = r.summary["max_ratio"];
    if (r.id == 5) constants["width_over_hs_bound_max"] = r.summary["max_width_over_bound"];
    if (r.id == 6) constants["strongint_lhs_over_width_max"] = r.summary["max_ratio"];
    if (r.id == 8) constants["nld_tail_minus_bound_max"] = r.summary["max_tail_minus_bound"];
    if (r.id == 9) constants["logsob_kappa_max"] = r.summary["max_empirical_kappa"];
  }
  return {{"criteria", table}, {"empirical_constants", constants}, {"all_passed", all}};
}

}  // namespace tilt

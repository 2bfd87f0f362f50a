#ifndef TILT_INTEGRABILITY_HPP
#define TILT_INTEGRABILITY_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "tilt/core.hpp"
#include "tilt/report.hpp"
#include "tilt/width.hpp"

namespace tilt {

enum class Law { bernoulli, exponential, gaussian };
enum class EvalMode { exact, monte_carlo };

struct SupProcessSpec {
  std::vector<std::vector<double>> V;
  Law law = Law::bernoulli;
  BernoulliParam p{};
  EvalMode mode = EvalMode::exact;
  std::uint64_t samples = 100000;
  std::uint64_t seed = 0;
};

inline constexpr int kMaxExactSupDim = 20;

struct LogMgfEstimate {
  double value = 0.0;
  double ci_half_width = 0.0;  // 95%, block jackknife; zero when exact
  double std_error = 0.0;
  std::string method;
  std::uint64_t samples = 0;
  std::uint64_t seed = 0;
  // Largest exponent seen and the share of the sum it carries: a dominant
  // single sample means the exponential mean is probably underestimated.
  double max_exponent = 0.0;
  double max_weight_share = 0.0;
  bool reliable = true;
};

// log E exp(sup_{xi in V} {<xi, X> - Lambda(xi)}) with Lambda the log-Laplace
// transform of the law of X.
LogMgfEstimate sup_process_log_mgf(const SupProcessSpec& spec);

// Log-Laplace transform of the product law at xi; +inf outside its domain.
double log_laplace(Law law, BernoulliParam p, std::span<const double> xi);

struct StrongIntConfig {
  double ratio_cap = 8.0;
  WidthMode width_mode = WidthMode::exact;
  std::uint64_t samples = 100000;
  std::uint64_t seed = 0;
  double tolerance = 1e-12;
};

// 0 <= log E exp(sup {<xi,X> - Lambda(xi)}) <= ratio_cap * b(V) under mu_p^n.
InequalityReport check_strongintB(const std::vector<std::vector<double>>& V, BernoulliParam p,
                                  const StrongIntConfig& config);

// log E exp(sup {<xi,X> - Lambda_eta(xi)}) <= E sup <Lambda_eta(xi), X - u>, X ~ eta^n.
// Monte Carlo, asserted within 3 standard errors of the difference.
InequalityReport check_intexpo(const std::vector<std::vector<double>>& V, std::uint64_t samples, std::uint64_t seed);
// n = 1 by quadrature, asserted at 1e-8.
InequalityReport check_intexpo_1d(const std::vector<double>& V);

// log E exp(sup {<xi,G> - |xi|^2/2}) <= E sup <xi, G>, G standard Gaussian.
InequalityReport check_strongG(const std::vector<std::vector<double>>& V, std::uint64_t samples, std::uint64_t seed);
InequalityReport check_strongG_1d(const std::vector<double>& V);

}  // namespace tilt

#endif

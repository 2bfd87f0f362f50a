#ifndef TILT_WIDTH_HPP
#define TILT_WIDTH_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

namespace tilt {

enum class WidthMode { exact, monte_carlo };
enum class WidthMethod { exact_enumeration, monte_carlo, closed_form };

std::string to_string(WidthMethod m);

inline constexpr int kMaxExactWidthDim = 20;
inline constexpr std::uint64_t kDefaultWidthSamples = 100000;

struct WidthEstimate {
  double mean = 0.0;
  double ci_half_width = 0.0;  // 95%; zero for exact values
  WidthMethod method = WidthMethod::exact_enumeration;
  std::uint64_t samples = 0;
  std::uint64_t seed = 0;
  double hs_bound = 0.0;  // sqrt(n) ||J||_2, Ising only
};

// b(V) = E sup_{xi in V} <xi, eps>. Exact mode needs n <= 20.
WidthEstimate rademacher_width_finite(const std::vector<std::vector<double>>& V, WidthMode mode,
                                      std::uint64_t samples, std::uint64_t seed);

// b(grad f([-1,1]^n)) for f = <x,Jx> + <h,x>: the sup over y is 2||J eps||_1 + <h,eps>,
// and the linear term has mean zero, so b = 2 E||J eps||_1.
WidthEstimate rademacher_width_ising(const Eigen::MatrixXd& J, const Eigen::VectorXd& h, WidthMode mode,
                                     std::uint64_t samples, std::uint64_t seed);

// g(V) = E sup_{xi in V} <xi, Gamma>, Monte Carlo only.
WidthEstimate gaussian_width_finite(const std::vector<std::vector<double>>& V, std::uint64_t samples,
                                    std::uint64_t seed);

}  // namespace tilt

#endif

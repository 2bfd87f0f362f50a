#ifndef TILT_QUADRATURE_HPP
#define TILT_QUADRATURE_HPP

#include <functional>
#include <span>
#include <stdexcept>
#include <string>

namespace tilt {

struct QuadratureError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct QuadratureResult {
  double value = 0.0;
  double error = 0.0;  // estimate
};

// Adaptive Gauss-Kronrod (61 points) on [a, b]; either bound may be infinite.
// Depth is capped; a non-finite value or an error estimate above `fail_above`
// raises QuadratureError with diagnostics.
QuadratureResult integrate(const std::function<double(double)>& f, double a, double b, double tol = 1e-10,
                           unsigned max_depth = 15, double fail_above = 1e-6);

// Same, split at interior breakpoints (kinks or singularities of f).
QuadratureResult integrate_pieces(const std::function<double(double)>& f, std::span<const double> points,
                                  double tol = 1e-10, unsigned max_depth = 15, double fail_above = 1e-6);

}  // namespace tilt

#endif

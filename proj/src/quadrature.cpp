#include "tilt/quadrature.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <sstream>

namespace tilt {

QuadratureResult integrate(const std::function<double(double)>& f, double a, double b, double tol,
                           unsigned max_depth, double fail_above) {
  QuadratureResult r;
  if (a == b) return r;
  double l1 = 0.0;
  r.value = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, max_depth, tol, &r.error, &l1);
  if (!std::isfinite(r.value) || !(r.error <= fail_above)) {
    std::ostringstream msg;
    msg << "quadrature did not converge on [" << a << ", " << b << "]: value " << r.value << ", error estimate "
        << r.error << ", L1 " << l1 << ", depth cap " << max_depth;
    throw QuadratureError(msg.str());
  }
  return r;
}

QuadratureResult integrate_pieces(const std::function<double(double)>& f, std::span<const double> points,
                                  double tol, unsigned max_depth, double fail_above) {
  QuadratureResult total;
  for (std::size_t i = 0; i + 1 < points.size(); ++i) {
    if (!(points[i + 1] > points[i])) continue;
    const auto part = integrate(f, points[i], points[i + 1], tol, max_depth, fail_above);
    total.value += part.value;
    total.error += part.error;
  }
  return total;
}

}  // namespace tilt

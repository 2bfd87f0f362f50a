#ifndef TILT_LOGSOB_HPP
#define TILT_LOGSOB_HPP

#include <cstdint>
#include <span>
#include <vector>

#include "tilt/core.hpp"
#include "tilt/report.hpp"
#include "tilt/width.hpp"

namespace tilt {

// nu = e^f mu on {-1,1}^n with mu uniform; f is stored as a dense vertex table.
class GibbsOnCube {
public:
  // Shifts f so that log E_mu e^f = 0 when normalize is set.
  GibbsOnCube(int n, std::vector<double> f_table, bool normalize = true);

  // f = <a, x> - sum log cosh a_i, the product tilt with means tanh a.
  static GibbsOnCube tilt(std::span<const double> a);

  int n() const { return n_; }
  const std::vector<double>& f_table() const { return f_; }
  bool normalized() const;
  const DenseDistribution& nu() const { return nu_; }

private:
  int n_;
  std::vector<double> f_;
  DenseDistribution nu_;
};

// I(nu) = E_nu sum_i I(tanh(grad_i f)), grad the discrete gradient.
double logsob_functional(const GibbsOnCube& g);
// E_nu (1/2)|grad f|^2, the classical upper bound.
double half_gradient_energy(const GibbsOnCube& g);
// |E_nu <tanh grad f, grad f> - E_nu <x, grad f>|; zero up to rounding.
double integration_identity_residual(const GibbsOnCube& g);

struct LogSobConfig {
  double ratio_cap = 8.0;
  double tolerance = 1e-10;
  WidthMode width_mode = WidthMode::exact;
  std::uint64_t width_samples = kDefaultWidthSamples;
  std::uint64_t seed = 0;
};

// H <= I <= E (1/2)|grad f|^2 and I <= H + ratio_cap * E_mu sup_y <grad f(y), x>.
InequalityReport check_logsob_pair(const GibbsOnCube& g, const LogSobConfig& config = {});

}  // namespace tilt

#endif

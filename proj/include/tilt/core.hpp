#ifndef TILT_CORE_HPP
#define TILT_CORE_HPP

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "tilt/ext_real.hpp"

namespace tilt {

// Largest hypercube dimension for which dense 2^n tables are materialized.
inline constexpr int kMaxDenseDim = 25;

// Spin of coordinate i in a packed hypercube state: bit i set means +1.
inline int spin(std::uint64_t state, int i) { return ((state >> i) & 1u) ? 1 : -1; }

std::vector<double> spins_of(std::uint64_t state, int n);

// Reference Bernoulli law (1-p) delta_{-1} + p delta_{+1} on {-1,1}.
class BernoulliParam {
public:
  explicit BernoulliParam(double p = 0.5);
  double p() const { return p_; }
  double h0() const { return 2.0 * p_ - 1.0; }  // mean of the reference law
  double tilt0() const;                          // atanh(h0) = log(p/(1-p))/2
  double log_p() const;
  double log_q() const;  // log(1-p)

private:
  double p_;
};

// Probability vector over all 2^n states of {-1,1}^n.
class DenseDistribution {
public:
  DenseDistribution(int n, std::vector<double> probs);

  static DenseDistribution uniform(int n);
  static DenseDistribution point_mass(int n, std::uint64_t state);
  // Normalizes nonnegative weights.
  static DenseDistribution from_weights(int n, std::vector<double> weights);
  // Normalizes exp(log_weights), shifted for stability.
  static DenseDistribution from_log_weights(int n, std::span<const double> log_weights);

  int n() const { return n_; }
  std::size_t size() const { return probs_.size(); }
  const std::vector<double>& probs() const { return probs_; }
  double operator[](std::uint64_t s) const { return probs_[s]; }

  // Marginal means E[x_i].
  std::vector<double> means() const;

private:
  int n_;
  std::vector<double> probs_;
};

// Product measure on {-1,1}^n with mean vector y; p identifies the reference law.
class ProductMeasure {
public:
  ProductMeasure(std::vector<double> y, BernoulliParam p = BernoulliParam{});
  // mu_p^n itself.
  static ProductMeasure reference(int n, BernoulliParam p);

  int n() const { return static_cast<int>(y_.size()); }
  const std::vector<double>& y() const { return y_; }
  const BernoulliParam& param() const { return p_; }

  double prob(std::uint64_t state) const;
  double log_prob(std::uint64_t state) const;
  DenseDistribution materialize() const;

private:
  std::vector<double> y_;
  BernoulliParam p_;
};

// Numerically stable accumulator for log(sum exp(v)).
struct LogSumExp {
  double max = -HUGE_VAL;
  double scaled_sum = 0.0;  // sum of exp(v - max)

  void add(double v);
  void merge(const LogSumExp& other);
  double value() const;  // -inf when empty
  static LogSumExp combine(LogSumExp a, const LogSumExp& b) {
    a.merge(b);
    return a;
  }
};

// x log(x/y) with the 0 log 0 := 0 convention.
double xlogx_over_y(double x, double y);

// Bernoulli rate function I_p; +inf outside [-1,1].
ExtReal rate_Ip(double x, BernoulliParam p);
// Derivative of I_p on (-1,1): atanh(x) - atanh(h0).
double rate_Ip_derivative(double x, BernoulliParam p);
// Sum of I_p over coordinates.
ExtReal rate_Ip_sum(std::span<const double> y, BernoulliParam p);
// I(y) = sum_i I_{1/2}(y_i).
ExtReal rate_I(std::span<const double> y);

// Lambda_p(t) = log(p e^t + (1-p) e^{-t}).
double log_laplace_bernoulli(double t, BernoulliParam p);
// Lambda_p'(t) = tanh(t + atanh(h0)), the mean of the tilted law.
double log_laplace_bernoulli_derivative(double t, BernoulliParam p);
double log_laplace_bernoulli_sum(std::span<const double> xi, BernoulliParam p);

// Lambda*_eta(t) = t - 1 - log t for the exponential law; +inf for t <= 0.
ExtReal exp_rate(double t);
// Lambda_eta(s) = -log(1 - s); +inf for s >= 1.
ExtReal exp_log_laplace(double s);

// H(nu|mu); +inf when nu charges a mu-null state.
ExtReal relative_entropy(const DenseDistribution& nu, const DenseDistribution& mu);
// H(nu | mu_p^n) without materializing the reference.
ExtReal relative_entropy_to_reference(const DenseDistribution& nu, BernoulliParam p);

struct LegendreResult {
  double value = 0.0;
  double argmax = 0.0;
  bool diverging = false;  // supremum sits on the search boundary
};

// Numerical sup_{xi in [lo,hi]} { xi * x - fn(xi) }: grid scan then golden-section polish.
// Cross-check oracle only.
LegendreResult legendre_1d(const std::function<double(double)>& fn, double x, double lo, double hi,
                           int grid = 2000);

}  // namespace tilt

#endif

#include "tilt/core.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <stdexcept>

namespace tilt {

std::vector<double> spins_of(std::uint64_t state, int n) {
  std::vector<double> x(n);
  for (int i = 0; i < n; ++i) x[i] = spin(state, i);
  return x;
}

BernoulliParam::BernoulliParam(double p) : p_(p) {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("BernoulliParam: p must lie in (0,1)");
}
double BernoulliParam::tilt0() const { return 0.5 * (std::log(p_) - std::log1p(-p_)); }
double BernoulliParam::log_p() const { return std::log(p_); }
double BernoulliParam::log_q() const { return std::log1p(-p_); }

namespace {

double neumaier_sum(std::span<const double> v) {
  double sum = 0.0, comp = 0.0;
  for (double x : v) {
    const double t = sum + x;
    comp += std::abs(sum) >= std::abs(x) ? (sum - t) + x : (x - t) + sum;
    sum = t;
  }
  return sum + comp;
}

void check_dim(int n) {
  if (n < 0 || n > kMaxDenseDim)
    throw std::invalid_argument("dense hypercube dimension must lie in [0, " +
                                std::to_string(kMaxDenseDim) + "]");
}

}  // namespace

DenseDistribution::DenseDistribution(int n, std::vector<double> probs) : n_(n), probs_(std::move(probs)) {
  check_dim(n);
  if (probs_.size() != (std::size_t{1} << n))
    throw std::invalid_argument("DenseDistribution: need 2^n probabilities");
  for (double v : probs_)
    if (!(v >= 0.0)) throw std::invalid_argument("DenseDistribution: negative or NaN entry");
  if (std::abs(neumaier_sum(probs_) - 1.0) > 1e-12)
    throw std::invalid_argument("DenseDistribution: entries must sum to 1");
}

DenseDistribution DenseDistribution::uniform(int n) {
  check_dim(n);
  const std::size_t size = std::size_t{1} << n;
  return DenseDistribution(n, std::vector<double>(size, 1.0 / static_cast<double>(size)));
}

DenseDistribution DenseDistribution::point_mass(int n, std::uint64_t state) {
  check_dim(n);
  std::vector<double> p(std::size_t{1} << n, 0.0);
  p.at(state) = 1.0;
  return DenseDistribution(n, std::move(p));
}

DenseDistribution DenseDistribution::from_weights(int n, std::vector<double> weights) {
  const double total = neumaier_sum(weights);
  if (!(total > 0.0)) throw std::invalid_argument("DenseDistribution: weights must have positive mass");
  for (double& w : weights) w /= total;
  // Exact renormalization leaves rounding far below the 1e-12 contract.
  return DenseDistribution(n, std::move(weights));
}

DenseDistribution DenseDistribution::from_log_weights(int n, std::span<const double> log_weights) {
  const double m = *std::max_element(log_weights.begin(), log_weights.end());
  std::vector<double> w(log_weights.size());
  for (std::size_t s = 0; s < w.size(); ++s) w[s] = std::exp(log_weights[s] - m);
  return from_weights(n, std::move(w));
}

std::vector<double> DenseDistribution::means() const {
  std::vector<double> m(n_, 0.0);
  for (std::size_t s = 0; s < probs_.size(); ++s)
    for (int i = 0; i < n_; ++i) m[i] += spin(s, i) * probs_[s];
  return m;
}

ProductMeasure::ProductMeasure(std::vector<double> y, BernoulliParam p) : y_(std::move(y)), p_(p) {
  for (double v : y_)
    if (!(std::abs(v) <= 1.0)) throw std::invalid_argument("ProductMeasure: means must lie in [-1,1]");
}

ProductMeasure ProductMeasure::reference(int n, BernoulliParam p) {
  return ProductMeasure(std::vector<double>(n, p.h0()), p);
}

double ProductMeasure::prob(std::uint64_t state) const {
  double prob = 1.0;
  for (int i = 0; i < n(); ++i) prob *= 0.5 * (1.0 + spin(state, i) * y_[i]);
  return prob;
}

double ProductMeasure::log_prob(std::uint64_t state) const {
  double lp = 0.0;
  for (int i = 0; i < n(); ++i) lp += std::log(0.5 * (1.0 + spin(state, i) * y_[i]));
  return lp;
}

DenseDistribution ProductMeasure::materialize() const {
  check_dim(n());
  std::vector<double> probs(std::size_t{1} << n(), 1.0);
  // Build by doubling so each entry is a product of exactly n factors.
  std::size_t len = 1;
  for (int i = 0; i < n(); ++i) {
    const double up = 0.5 * (1.0 + y_[i]), down = 0.5 * (1.0 - y_[i]);
    for (std::size_t s = 0; s < len; ++s) {
      probs[s + len] = probs[s] * up;
      probs[s] *= down;
    }
    len <<= 1;
  }
  return DenseDistribution::from_weights(n(), std::move(probs));
}

void LogSumExp::add(double v) {
  if (v == -HUGE_VAL) return;
  if (v <= max) {
    scaled_sum += std::exp(v - max);
  } else {
    scaled_sum = scaled_sum * std::exp(max - v) + 1.0;
    max = v;
  }
}

void LogSumExp::merge(const LogSumExp& o) {
  if (o.max == -HUGE_VAL) return;
  if (max == -HUGE_VAL) {
    *this = o;
    return;
  }
  if (o.max <= max) {
    scaled_sum += o.scaled_sum * std::exp(o.max - max);
  } else {
    scaled_sum = scaled_sum * std::exp(max - o.max) + o.scaled_sum;
    max = o.max;
  }
}

double LogSumExp::value() const { return max == -HUGE_VAL ? -HUGE_VAL : max + std::log(scaled_sum); }

double xlogx_over_y(double x, double y) {
  if (x == 0.0) return 0.0;
  return x * std::log(x / y);
}

ExtReal rate_Ip(double x, BernoulliParam p) {
  if (!(std::abs(x) <= 1.0)) return ExtReal::pos_inf();
  const double up = 0.5 * (1.0 + x), down = 0.5 * (1.0 - x);
  return xlogx_over_y(up, p.p()) + xlogx_over_y(down, 1.0 - p.p());
}

double rate_Ip_derivative(double x, BernoulliParam p) { return std::atanh(x) - p.tilt0(); }

ExtReal rate_Ip_sum(std::span<const double> y, BernoulliParam p) {
  ExtReal total = 0.0;
  for (double v : y) total += rate_Ip(v, p);
  return total;
}

ExtReal rate_I(std::span<const double> y) {
  ExtReal total = 0.0;
  for (double v : y) {
    if (!(std::abs(v) <= 1.0)) return ExtReal::pos_inf();
    const double a = 1.0 + v, b = 1.0 - v;
    total += 0.5 * (a == 0.0 ? 0.0 : a * std::log(a)) + 0.5 * (b == 0.0 ? 0.0 : b * std::log(b));
  }
  return total;
}

double log_laplace_bernoulli(double t, BernoulliParam p) {
  // Shift by |t| so that neither exponential overflows.
  if (t >= 0) return t + std::log(p.p() + (1.0 - p.p()) * std::exp(-2.0 * t));
  return -t + std::log(p.p() * std::exp(2.0 * t) + (1.0 - p.p()));
}

double log_laplace_bernoulli_derivative(double t, BernoulliParam p) { return std::tanh(t + p.tilt0()); }

double log_laplace_bernoulli_sum(std::span<const double> xi, BernoulliParam p) {
  double total = 0.0;
  for (double v : xi) total += log_laplace_bernoulli(v, p);
  return total;
}

ExtReal exp_rate(double t) {
  if (!(t > 0.0)) return ExtReal::pos_inf();
  return t - 1.0 - std::log(t);
}

ExtReal exp_log_laplace(double s) {
  if (!(s < 1.0)) return ExtReal::pos_inf();
  return -std::log1p(-s);
}

ExtReal relative_entropy(const DenseDistribution& nu, const DenseDistribution& mu) {
  if (nu.n() != mu.n()) throw std::invalid_argument("relative_entropy: dimension mismatch");
  std::vector<double> terms;
  terms.reserve(nu.size());
  for (std::size_t s = 0; s < nu.size(); ++s) {
    if (nu[s] == 0.0) continue;
    if (mu[s] == 0.0) return ExtReal::pos_inf();
    terms.push_back(nu[s] * std::log(nu[s] / mu[s]));
  }
  return std::max(0.0, neumaier_sum(terms));
}

ExtReal relative_entropy_to_reference(const DenseDistribution& nu, BernoulliParam p) {
  const double lp = p.log_p(), lq = p.log_q();
  std::vector<double> terms;
  terms.reserve(nu.size());
  for (std::size_t s = 0; s < nu.size(); ++s) {
    if (nu[s] == 0.0) continue;
    const int ups = std::popcount(static_cast<std::uint64_t>(s));
    const double log_mu = ups * lp + (nu.n() - ups) * lq;
    terms.push_back(nu[s] * (std::log(nu[s]) - log_mu));
  }
  return std::max(0.0, neumaier_sum(terms));
}

LegendreResult legendre_1d(const std::function<double(double)>& fn, double x, double lo, double hi, int grid) {
  if (!(hi > lo)) throw std::invalid_argument("legendre_1d: empty search interval");
  grid = std::max(grid, 8);
  auto objective = [&](double xi) {
    const double v = fn(xi);
    return std::isfinite(v) ? xi * x - v : -HUGE_VAL;
  };
  const double step = (hi - lo) / grid;
  int best = 0;
  double best_val = -HUGE_VAL;
  for (int k = 0; k <= grid; ++k) {
    const double v = objective(lo + k * step);
    if (v > best_val) {
      best_val = v;
      best = k;
    }
  }
  if (best_val == -HUGE_VAL) throw std::invalid_argument("legendre_1d: function infinite on the interval");
  double a = lo + std::max(best - 1, 0) * step;
  double b = lo + std::min(best + 1, grid) * step;
  const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - invphi * (b - a), d = a + invphi * (b - a);
  double fc = objective(c), fd = objective(d);
  for (int it = 0; it < 200 && b - a > 1e-15 * std::max(1.0, std::abs(a)); ++it) {
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - invphi * (b - a);
      fc = objective(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + invphi * (b - a);
      fd = objective(d);
    }
  }
  LegendreResult r;
  r.argmax = 0.5 * (a + b);
  r.value = objective(r.argmax);
  for (double cand : {lo + best * step, a, b}) {
    const double v = objective(cand);
    if (v > r.value) {
      r.value = v;
      r.argmax = cand;
    }
  }
  r.diverging = (best == 0 || best == grid) && (r.argmax <= lo + step || r.argmax >= hi - step);
  return r;
}

}  // namespace tilt

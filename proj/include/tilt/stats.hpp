#ifndef TILT_STATS_HPP
#define TILT_STATS_HPP

#include <cmath>
#include <cstdint>

namespace tilt {

// Running mean/variance (Chan et al. merge), used by every Monte-Carlo estimator.
struct Moments {
  std::uint64_t count = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double x) {
    ++count;
    const double d = x - mean;
    mean += d / static_cast<double>(count);
    m2 += d * (x - mean);
  }
  void merge(const Moments& o) {
    if (o.count == 0) return;
    if (count == 0) {
      *this = o;
      return;
    }
    const double total = static_cast<double>(count + o.count);
    const double d = o.mean - mean;
    mean += d * static_cast<double>(o.count) / total;
    m2 += o.m2 + d * d * static_cast<double>(count) * static_cast<double>(o.count) / total;
    count += o.count;
  }
  static Moments combine(Moments a, const Moments& b) {
    a.merge(b);
    return a;
  }
  double variance() const { return count > 1 ? m2 / static_cast<double>(count - 1) : 0.0; }
  double std_error() const { return count > 0 ? std::sqrt(variance() / static_cast<double>(count)) : 0.0; }
  // 95% normal-approximation half width.
  double ci95() const { return 1.959963984540054 * std_error(); }
};

}  // namespace tilt

#endif

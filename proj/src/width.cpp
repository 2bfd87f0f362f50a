#include "tilt/width.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <stdexcept>

#include "tilt/parallel.hpp"
#include "tilt/rng.hpp"
#include "tilt/stats.hpp"

namespace tilt {

std::string to_string(WidthMethod m) {
  switch (m) {
    case WidthMethod::exact_enumeration: return "exact_enumeration";
    case WidthMethod::monte_carlo: return "monte_carlo";
    case WidthMethod::closed_form: return "closed_form";
  }
  return "unknown";
}

namespace {

int check_set(const std::vector<std::vector<double>>& V) {
  if (V.empty()) throw std::invalid_argument("width: V must be nonempty");
  const auto n = V.front().size();
  for (const auto& v : V)
    if (v.size() != n) throw std::invalid_argument("width: vectors of V differ in dimension");
  return static_cast<int>(n);
}

// Row-major copy for cache-friendly dot products.
std::vector<double> flatten(const std::vector<std::vector<double>>& V) {
  std::vector<double> flat;
  flat.reserve(V.size() * V.front().size());
  for (const auto& v : V) flat.insert(flat.end(), v.begin(), v.end());
  return flat;
}

std::uint64_t gray(std::uint64_t k) { return k ^ (k >> 1); }

WidthEstimate monte_carlo_width(const std::vector<std::vector<double>>& V, std::uint64_t samples,
                                std::uint64_t seed, bool gaussian) {
  const int n = check_set(V);
  const auto flat = flatten(V);
  const std::size_t m = V.size();
  samples = std::max<std::uint64_t>(samples, 2);
  const auto tag = gaussian ? StreamTag::gaussian : StreamTag::rademacher;
  const auto moments = chunked_reduce<Moments>(
      samples,
      [&](std::uint64_t lo, std::uint64_t hi) {
        Moments acc;
        std::vector<double> z(n);
        for (std::uint64_t k = lo; k < hi; ++k) {
          CounterRng rng(seed, tag, k);
          for (auto& v : z) v = gaussian ? rng.normal() : rng.rademacher();
          double best = -HUGE_VAL;
          for (std::size_t r = 0; r < m; ++r) {
            double d = 0.0;
            for (int i = 0; i < n; ++i) d += flat[r * n + i] * z[i];
            best = std::max(best, d);
          }
          acc.add(best);
        }
        return acc;
      },
      Moments::combine);
  WidthEstimate w;
  w.mean = moments.mean;
  w.ci_half_width = moments.ci95();
  w.method = WidthMethod::monte_carlo;
  w.samples = samples;
  w.seed = seed;
  return w;
}

}  // namespace

WidthEstimate rademacher_width_finite(const std::vector<std::vector<double>>& V, WidthMode mode,
                                      std::uint64_t samples, std::uint64_t seed) {
  const int n = check_set(V);
  if (mode == WidthMode::monte_carlo) return monte_carlo_width(V, samples, seed, false);
  if (n > kMaxExactWidthDim) throw std::invalid_argument("width: exact mode needs n <= 20");
  const std::size_t m = V.size();
  // Transposed copy: flipping eps_i updates every dot product by -2 eps_i V[.][i].
  std::vector<double> cols(m * std::max(n, 1));
  for (std::size_t r = 0; r < m; ++r)
    for (int i = 0; i < n; ++i) cols[i * m + r] = V[r][i];
  const std::uint64_t total = std::uint64_t{1} << n;
  const double sum = chunked_reduce<double>(
      total,
      [&](std::uint64_t lo, std::uint64_t hi) {
        if (lo >= hi) return 0.0;
        std::uint64_t state = gray(lo);
        std::vector<double> dots(m, 0.0);
        for (std::size_t r = 0; r < m; ++r)
          for (int i = 0; i < n; ++i) dots[r] += V[r][i] * (((state >> i) & 1u) ? 1.0 : -1.0);
        double acc = *std::max_element(dots.begin(), dots.end());
        for (std::uint64_t k = lo + 1; k < hi; ++k) {
          const int i = std::countr_zero(k);
          const double was = ((state >> i) & 1u) ? 1.0 : -1.0;
          state ^= std::uint64_t{1} << i;
          const double* c = &cols[i * m];
          double best = -HUGE_VAL;
          for (std::size_t r = 0; r < m; ++r) {
            dots[r] -= 2.0 * was * c[r];
            best = std::max(best, dots[r]);
          }
          acc += best;
        }
        return acc;
      },
      [](double a, double b) { return a + b; });
  WidthEstimate w;
  w.mean = sum / static_cast<double>(total);
  w.method = WidthMethod::exact_enumeration;
  w.samples = total;
  w.seed = seed;
  return w;
}

WidthEstimate rademacher_width_ising(const Eigen::MatrixXd& J, const Eigen::VectorXd& h, WidthMode mode,
                                     std::uint64_t samples, std::uint64_t seed) {
  const auto n = J.rows();
  if (J.cols() != n || h.size() != n) throw std::invalid_argument("width: J must be n x n and h of length n");
  const double scale = std::max(1.0, J.cwiseAbs().maxCoeff());
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < i; ++j)
      if (std::abs(J(i, j) - J(j, i)) > 1e-12 * scale) throw std::invalid_argument("width: J must be symmetric");
  WidthEstimate w;
  w.seed = seed;
  w.hs_bound = std::sqrt(static_cast<double>(n)) * J.norm();
  if (n == 0) return w;
  if (mode == WidthMode::exact) {
    if (n > kMaxExactWidthDim) throw std::invalid_argument("width: exact mode needs n <= 20");
    // ||J eps||_1 is even in eps, so half the cube (eps_{n-1} = -1) suffices.
    const std::uint64_t total = std::uint64_t{1} << (n - 1);
    const double sum = chunked_reduce<double>(
        total,
        [&](std::uint64_t lo, std::uint64_t hi) {
          if (lo >= hi) return 0.0;
          std::uint64_t state = gray(lo);
          Eigen::VectorXd eps(n);
          for (Eigen::Index i = 0; i < n; ++i) eps[i] = ((state >> i) & 1u) ? 1.0 : -1.0;
          Eigen::VectorXd field = J * eps;
          double acc = field.lpNorm<1>();
          for (std::uint64_t k = lo + 1; k < hi; ++k) {
            const int i = std::countr_zero(k);
            field.noalias() -= 2.0 * eps[i] * J.col(i);
            eps[i] = -eps[i];
            acc += field.lpNorm<1>();
          }
          return acc;
        },
        [](double a, double b) { return a + b; });
    w.mean = 2.0 * sum / static_cast<double>(total);
    w.method = WidthMethod::closed_form;
    w.samples = total;
    return w;
  }
  samples = std::max<std::uint64_t>(samples, 2);
  const auto moments = chunked_reduce<Moments>(
      samples,
      [&](std::uint64_t lo, std::uint64_t hi) {
        Moments acc;
        Eigen::VectorXd eps(n);
        for (std::uint64_t k = lo; k < hi; ++k) {
          CounterRng rng(seed, StreamTag::rademacher, k);
          for (Eigen::Index i = 0; i < n; ++i) eps[i] = rng.rademacher();
          acc.add(2.0 * (J * eps).lpNorm<1>());
        }
        return acc;
      },
      Moments::combine);
  w.mean = moments.mean;
  w.ci_half_width = moments.ci95();
  w.method = WidthMethod::monte_carlo;
  w.samples = samples;
  return w;
}

WidthEstimate gaussian_width_finite(const std::vector<std::vector<double>>& V, std::uint64_t samples,
                                    std::uint64_t seed) {
  return monte_carlo_width(V, samples, seed, true);
}

}  // namespace tilt

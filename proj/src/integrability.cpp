#include "tilt/integrability.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "tilt/parallel.hpp"
#include "tilt/quadrature.hpp"
#include "tilt/rng.hpp"

namespace tilt {

namespace {

int check_set(const std::vector<std::vector<double>>& V) {
  if (V.empty()) throw std::invalid_argument("sup process: V must be nonempty");
  for (const auto& v : V)
    if (v.size() != V.front().size()) throw std::invalid_argument("sup process: vectors of V differ in dimension");
  return static_cast<int>(V.front().size());
}

// Per-chunk accumulators for a log-mean-exp and a plain mean over the same samples.
struct Block {
  LogSumExp lse;
  double sum = 0.0;  // of the companion statistic
  std::uint64_t count = 0;
};

struct BlockSummary {
  std::vector<Block> blocks;
  LogSumExp total;
  double sum = 0.0;
  std::uint64_t count = 0;
};

double log_mean(const LogSumExp& l, std::uint64_t count) { return l.value() - std::log(static_cast<double>(count)); }

// Block jackknife of g(log-mean-exp, mean) = a * lme + b * mean.
std::pair<double, double> jackknife(const BlockSummary& s, double a, double b) {
  const std::size_t B = s.blocks.size();
  std::vector<double> th(B);
  double mean = 0.0;
  for (std::size_t k = 0; k < B; ++k) {
    // Leave block k out: log(sum exp) of the rest, computed stably.
    LogSumExp rest;
    for (std::size_t q = 0; q < B; ++q)
      if (q != k) rest.merge(s.blocks[q].lse);
    const std::uint64_t n = s.count - s.blocks[k].count;
    th[k] = a * log_mean(rest, n) + b * (s.sum - s.blocks[k].sum) / static_cast<double>(n);
    mean += th[k] / static_cast<double>(B);
  }
  double var = 0.0;
  for (double t : th) var += (t - mean) * (t - mean);
  var *= static_cast<double>(B - 1) / static_cast<double>(B);
  const double full = a * log_mean(s.total, s.count) + b * s.sum / static_cast<double>(s.count);
  return {full, std::sqrt(var)};
}

// Draws X of the given law, computes (exponent, companion) per sample.
template <class Fn>
BlockSummary sample_blocks(std::uint64_t samples, Fn&& per_sample) {
  samples = std::max<std::uint64_t>(samples, 2 * kDefaultChunks);
  BlockSummary s;
  s.blocks.resize(kDefaultChunks);
  parallel_for(kDefaultChunks, [&](std::size_t c) {
    const std::uint64_t lo = samples * c / kDefaultChunks, hi = samples * (c + 1) / kDefaultChunks;
    Block b;
    for (std::uint64_t k = lo; k < hi; ++k) {
      const auto [z, y] = per_sample(k);
      b.lse.add(z);
      b.sum += y;
      ++b.count;
    }
    s.blocks[c] = b;
  });
  // Fixed-order pairwise fold keeps the totals independent of the worker count.
  std::vector<Block> level = s.blocks;
  while (level.size() > 1) {
    std::vector<Block> next;
    for (std::size_t i = 0; i + 1 < level.size(); i += 2) {
      Block b = level[i];
      b.lse.merge(level[i + 1].lse);
      b.sum += level[i + 1].sum;
      b.count += level[i + 1].count;
      next.push_back(b);
    }
    if (level.size() % 2) next.push_back(level.back());
    level = std::move(next);
  }
  s.total = level.front().lse;
  s.sum = level.front().sum;
  s.count = level.front().count;
  return s;
}

void draw(Law law, BernoulliParam p, CounterRng& rng, std::vector<double>& x) {
  for (auto& v : x) {
    switch (law) {
      case Law::bernoulli: v = rng.bernoulli_sign(p.p()); break;
      case Law::exponential: v = rng.exponential(); break;
      case Law::gaussian: v = rng.normal(); break;
    }
  }
}

StreamTag tag_of(Law law) {
  switch (law) {
    case Law::bernoulli: return StreamTag::bernoulli;
    case Law::exponential: return StreamTag::exponential;
    case Law::gaussian: return StreamTag::gaussian;
  }
  return StreamTag::generic;
}

std::string law_name(Law law) {
  switch (law) {
    case Law::bernoulli: return "bernoulli";
    case Law::exponential: return "exponential";
    case Law::gaussian: return "gaussian";
  }
  return "unknown";
}

struct Centered {
  std::vector<double> flat;  // row-major V
  std::vector<double> offset;  // Lambda(xi) per row
  int n;
  std::size_t m;

  double sup(std::span<const double> x) const {
    double best = -HUGE_VAL;
    for (std::size_t r = 0; r < m; ++r) {
      double d = -offset[r];
      for (int i = 0; i < n; ++i) d += flat[r * n + i] * x[i];
      best = std::max(best, d);
    }
    return best;
  }
};

Centered centered(const std::vector<std::vector<double>>& V, Law law, BernoulliParam p) {
  Centered c;
  c.n = check_set(V);
  c.m = V.size();
  for (const auto& v : V) {
    c.flat.insert(c.flat.end(), v.begin(), v.end());
    const double L = log_laplace(law, p, v);
    if (!std::isfinite(L)) throw std::domain_error("sup process: some xi lies outside the log-Laplace domain");
    c.offset.push_back(L);
  }
  return c;
}

double max_share(const BlockSummary& s, double max_z) { return std::exp(max_z - s.total.value()); }

}  // namespace

double log_laplace(Law law, BernoulliParam p, std::span<const double> xi) {
  double total = 0.0;
  for (double v : xi) {
    switch (law) {
      case Law::bernoulli: total += log_laplace_bernoulli(v, p); break;
      case Law::exponential:
        if (!(v < 1.0)) return HUGE_VAL;
        total += -std::log1p(-v);
        break;
      case Law::gaussian: total += 0.5 * v * v; break;
    }
  }
  return total;
}

LogMgfEstimate sup_process_log_mgf(const SupProcessSpec& spec) {
  const auto c = centered(spec.V, spec.law, spec.p);
  const int n = c.n;
  LogMgfEstimate est;
  est.seed = spec.seed;
  if (spec.mode == EvalMode::exact) {
    if (spec.law != Law::bernoulli) throw std::invalid_argument("sup process: exact mode needs the Bernoulli law");
    if (n > kMaxExactSupDim) throw std::invalid_argument("sup process: exact mode needs n <= 20");
    const std::uint64_t total = std::uint64_t{1} << n;
    const std::size_t m = c.m;
    std::vector<double> cols(m * std::max(n, 1));
    for (std::size_t r = 0; r < m; ++r)
      for (int i = 0; i < n; ++i) cols[i * m + r] = c.flat[r * n + i];
    const double lp = spec.p.log_p(), lq = spec.p.log_q();
    struct Acc {
      LogSumExp lse;
      double max_z = -HUGE_VAL;
      static Acc combine(Acc a, const Acc& b) {
        a.lse.merge(b.lse);
        a.max_z = std::max(a.max_z, b.max_z);
        return a;
      }
    };
    const Acc acc = chunked_reduce<Acc>(
        total,
        [&](std::uint64_t lo, std::uint64_t hi) {
          Acc a;
          if (lo >= hi) return a;
          std::uint64_t state = lo ^ (lo >> 1);
          std::vector<double> dots(m);
          for (std::size_t r = 0; r < m; ++r) {
            double d = -c.offset[r];
            for (int i = 0; i < n; ++i) d += c.flat[r * n + i] * spin(state, i);
            dots[r] = d;
          }
          for (std::uint64_t k = lo;; ++k) {
            const double z = *std::max_element(dots.begin(), dots.end());
            const int ups = std::popcount(state);
            a.lse.add(z + ups * lp + (n - ups) * lq);
            a.max_z = std::max(a.max_z, z);
            if (k + 1 == hi) break;
            const int i = std::countr_zero(k + 1);
            const double was = spin(state, i);
            state ^= std::uint64_t{1} << i;
            const double* col = &cols[i * m];
            for (std::size_t r = 0; r < m; ++r) dots[r] -= 2.0 * was * col[r];
          }
          return a;
        },
        Acc::combine);
    est.value = acc.lse.value();
    est.method = "exact_enumeration";
    est.samples = total;
    est.max_exponent = acc.max_z;
    return est;
  }
  double max_z = -HUGE_VAL;
  std::vector<double> block_max(kDefaultChunks, -HUGE_VAL);
  const auto s = sample_blocks(spec.samples, [&](std::uint64_t k) {
    CounterRng rng(spec.seed, tag_of(spec.law), k);
    thread_local std::vector<double> x;
    x.resize(n);
    draw(spec.law, spec.p, rng, x);
    const double z = c.sup(x);
    return std::pair<double, double>{z, 0.0};
  });
  for (const auto& b : s.blocks) max_z = std::max(max_z, b.lse.max);
  const auto [value, se] = jackknife(s, 1.0, 0.0);
  est.value = value;
  est.std_error = se;
  est.ci_half_width = 1.959963984540054 * se;
  est.method = "monte_carlo_" + law_name(spec.law);
  est.samples = s.count;
  est.max_exponent = max_z;
  est.max_weight_share = max_share(s, max_z);
  est.reliable = est.max_weight_share < 0.01;
  return est;
}

InequalityReport check_strongintB(const std::vector<std::vector<double>>& V, BernoulliParam p,
                                  const StrongIntConfig& config) {
  const int n = check_set(V);
  SupProcessSpec spec{V, Law::bernoulli, p, n <= kMaxExactSupDim ? EvalMode::exact : EvalMode::monte_carlo,
                      config.samples, config.seed};
  const auto lhs = sup_process_log_mgf(spec);
  const WidthMode wm = n <= kMaxExactWidthDim ? config.width_mode : WidthMode::monte_carlo;
  const auto b = rademacher_width_finite(V, wm, config.samples, config.seed);
  auto r = make_report("strong_integrability_bernoulli", lhs.value, config.ratio_cap * b.mean, config.tolerance,
                       lhs.method, config.seed);
  r.holds = r.holds && lhs.value >= -config.tolerance;
  if (b.mean > 1e-12) r.ratio = lhs.value / b.mean;
  r.details["log_mgf"] = json_number(lhs.value);
  r.details["log_mgf_ci"] = json_number(lhs.ci_half_width);
  r.details["width"] = to_json(b);
  r.details["ratio_cap"] = config.ratio_cap;
  r.details["n"] = n;
  r.details["size"] = V.size();
  r.details["p"] = p.p();
  return r;
}

namespace {

// Common-sample Monte Carlo of (log-mean-exp of the centered sup, mean of `rhs`).
InequalityReport mc_pair_check(const std::string& name, const std::vector<std::vector<double>>& V, Law law,
                               std::uint64_t samples, std::uint64_t seed,
                               const std::function<double(std::span<const double>)>& rhs_stat) {
  const auto c = centered(V, law, BernoulliParam{});
  const int n = c.n;
  const auto s = sample_blocks(samples, [&](std::uint64_t k) {
    CounterRng rng(seed, tag_of(law), k);
    thread_local std::vector<double> x;
    x.resize(n);
    draw(law, BernoulliParam{}, rng, x);
    return std::pair<double, double>{c.sup(x), rhs_stat(x)};
  });
  const auto [lhs, se_l] = jackknife(s, 1.0, 0.0);
  const auto [rhs, se_r] = jackknife(s, 0.0, 1.0);
  const auto [diff, se_d] = jackknife(s, 1.0, -1.0);
  auto r = make_report(name, lhs, rhs, 3.0 * se_d, "monte_carlo", seed);
  double max_z = -HUGE_VAL;
  for (const auto& b : s.blocks) max_z = std::max(max_z, b.lse.max);
  r.details["lhs_std_error"] = se_l;
  r.details["rhs_std_error"] = se_r;
  r.details["difference_std_error"] = se_d;
  r.details["samples"] = s.count;
  r.details["max_exponent"] = json_number(max_z);
  r.details["max_weight_share"] = json_number(max_share(s, max_z));
  r.details["reliable"] = max_share(s, max_z) < 0.01;
  r.details["n"] = n;
  r.details["size"] = V.size();
  (void)diff;
  return r;
}

// max_k (a_k x + b_k) integrated against a density on [lo, hi], split at every crossing.
std::vector<double> crossings(const std::vector<double>& a, const std::vector<double>& b, double lo, double hi) {
  std::vector<double> pts{lo, hi};
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = i + 1; j < a.size(); ++j)
      if (a[i] != a[j]) {
        const double x = (b[j] - b[i]) / (a[i] - a[j]);
        if (x > lo && x < hi) pts.push_back(x);
      }
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  return pts;
}

double upper_envelope(const std::vector<double>& a, const std::vector<double>& b, double x) {
  double best = -HUGE_VAL;
  for (std::size_t i = 0; i < a.size(); ++i) best = std::max(best, a[i] * x + b[i]);
  return best;
}

}  // namespace

InequalityReport check_intexpo(const std::vector<std::vector<double>>& V, std::uint64_t samples, std::uint64_t seed) {
  check_set(V);
  for (const auto& v : V)
    for (double x : v)
      if (!(x < 1.0)) throw std::domain_error("check_intexpo: every coordinate of xi must be < 1");
  // Lambda_eta(xi) coordinatewise, paired with X - u.
  std::vector<std::vector<double>> L;
  for (const auto& v : V) {
    std::vector<double> row(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) row[i] = -std::log1p(-v[i]);
    L.push_back(std::move(row));
  }
  auto rhs = [&](std::span<const double> x) {
    double best = -HUGE_VAL;
    for (const auto& row : L) {
      double d = 0.0;
      for (std::size_t i = 0; i < row.size(); ++i) d += row[i] * (x[i] - 1.0);
      best = std::max(best, d);
    }
    return best;
  };
  return mc_pair_check("integrability_exponential", V, Law::exponential, samples, seed, rhs);
}

InequalityReport check_intexpo_1d(const std::vector<double>& V) {
  if (V.empty()) throw std::invalid_argument("check_intexpo_1d: V must be nonempty");
  std::vector<double> a, b, la, lb;
  for (double xi : V) {
    if (!(xi < 1.0)) throw std::domain_error("check_intexpo_1d: xi must be < 1");
    const double L = -std::log1p(-xi);
    a.push_back(xi);
    b.push_back(-L);
    la.push_back(L);
    lb.push_back(-L);
  }
  const auto pl = crossings(a, b, 0.0, HUGE_VAL);
  const auto pr = crossings(la, lb, 0.0, HUGE_VAL);
  // E exp(max) with the e^{-x} density folded into the exponent.
  const double mgf = integrate_pieces([&](double x) { return std::exp(upper_envelope(a, b, x) - x); }, pl, 1e-14).value;
  const double rhs = integrate_pieces([&](double x) { return upper_envelope(la, lb, x) * std::exp(-x); }, pr, 1e-14).value;
  auto r = make_report("integrability_exponential_1d", std::log(mgf), rhs, 1e-8, "quadrature");
  r.details["size"] = V.size();
  return r;
}

InequalityReport check_strongG(const std::vector<std::vector<double>>& V, std::uint64_t samples, std::uint64_t seed) {
  const int n = check_set(V);
  auto rhs = [&](std::span<const double> x) {
    double best = -HUGE_VAL;
    for (const auto& v : V) {
      double d = 0.0;
      for (int i = 0; i < n; ++i) d += v[i] * x[i];
      best = std::max(best, d);
    }
    return best;
  };
  return mc_pair_check("integrability_gaussian", V, Law::gaussian, samples, seed, rhs);
}

InequalityReport check_strongG_1d(const std::vector<double>& V) {
  if (V.empty()) throw std::invalid_argument("check_strongG_1d: V must be nonempty");
  std::vector<double> a, b, zero;
  for (double xi : V) {
    a.push_back(xi);
    b.push_back(-0.5 * xi * xi);
    zero.push_back(0.0);
  }
  const double inv = 1.0 / std::sqrt(2.0 * std::numbers::pi);
  auto pts = crossings(a, b, -HUGE_VAL, HUGE_VAL);
  auto pts_r = crossings(a, zero, -HUGE_VAL, HUGE_VAL);
  pts.push_back(0.0);
  std::sort(pts.begin(), pts.end());
  const double mgf =
      integrate_pieces([&](double x) { return inv * std::exp(upper_envelope(a, b, x) - 0.5 * x * x); }, pts, 1e-14).value;
  const double rhs =
      integrate_pieces([&](double x) { return inv * upper_envelope(a, zero, x) * std::exp(-0.5 * x * x); }, pts_r, 1e-14)
          .value;
  auto r = make_report("integrability_gaussian_1d", std::log(mgf), rhs, 1e-8, "quadrature");
  r.details["size"] = V.size();
  return r;
}

}  // namespace tilt

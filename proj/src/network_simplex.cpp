#include "tilt/network_simplex.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace tilt {

namespace {

constexpr int kUp = 1, kDown = -1;

class Solver {
public:
  Solver(std::span<const double> supply, std::span<const double> demand, std::span<const double> cost)
      : k_(static_cast<int>(supply.size())),
        m_(static_cast<int>(demand.size())),
        nodes_(k_ + m_),
        root_(nodes_),
        real_arcs_(static_cast<std::int64_t>(k_) * m_),
        cost_(cost) {
    double scale = 1.0;
    for (double c : cost_)
      if (std::isfinite(c)) scale = std::max(scale, std::abs(c));
    eps_ = 1e-12 * scale;

    const std::size_t all = nodes_ + 1;
    parent_.assign(all, -1);
    pred_arc_.assign(all, -1);
    dir_.assign(all, kUp);
    depth_.assign(all, 0);
    child_.assign(all, -1);
    next_.assign(all, -1);
    prev_.assign(all, -1);
    pa_.assign(all, 0.0);
    pc_.assign(all, 0.0);
    flow_.assign(real_arcs_ + nodes_, 0.0);
    in_tree_.assign(real_arcs_ + nodes_, 0);
    art_src_.assign(nodes_, 0);

    for (int u = 0; u < nodes_; ++u) {
      const double s = u < k_ ? supply[u] : -demand[u - k_];
      const std::int64_t e = real_arcs_ + u;
      in_tree_[e] = 1;
      link(u, root_);
      pred_arc_[u] = e;
      depth_[u] = 1;
      if (s >= 0) {
        dir_[u] = kUp;  // u -> root
        flow_[e] = s;
      } else {
        dir_[u] = kDown;  // root -> u
        flow_[e] = -s;
        pa_[u] = 1.0;
      }
      art_src_[u] = dir_[u] == kUp;
    }
  }

  void run() {
    phase_ = 1;
    solve();
    double art = 0.0;
    for (int u = 0; u < nodes_; ++u) art += flow_[real_arcs_ + u];
    if (art > 1e-9) throw InfeasibleTransport("transport: no coupling with finite cost exists");
    phase_ = 2;
    solve();
  }

  NetworkSimplexResult result(std::span<const double> supply, std::span<const double> demand) const {
    NetworkSimplexResult r;
    r.pivots = pivots_;
    for (std::int64_t e = 0; e < real_arcs_; ++e) {
      if (flow_[e] > 0) {
        const int i = static_cast<int>(e / m_), j = static_cast<int>(e % m_);
        r.plan.push_back({i, j, flow_[e]});
        r.primal += flow_[e] * cost_[e];
      }
    }
    r.source_potential.resize(k_);
    for (int i = 0; i < k_; ++i) r.source_potential[i] = -pc_[i];
    r.target_potential.assign(m_, HUGE_VAL);
    for (int i = 0; i < k_; ++i)
      for (int j = 0; j < m_; ++j) {
        const double c = cost_[static_cast<std::int64_t>(i) * m_ + j];
        if (std::isfinite(c)) r.target_potential[j] = std::min(r.target_potential[j], c - r.source_potential[i]);
      }
    for (int i = 0; i < k_; ++i) r.dual += supply[i] * r.source_potential[i];
    for (int j = 0; j < m_; ++j)
      if (demand[j] > 0) r.dual += demand[j] * r.target_potential[j];
    for (const auto& e : r.plan) {
      const double c = cost_[static_cast<std::int64_t>(e.source) * m_ + e.target];
      r.cs_residual =
          std::max(r.cs_residual, std::abs(c - r.source_potential[e.source] - r.target_potential[e.target]));
    }
    return r;
  }

private:
  int src(std::int64_t e) const { return e < real_arcs_ ? static_cast<int>(e / m_) : art_src(e); }
  int tgt(std::int64_t e) const { return e < real_arcs_ ? k_ + static_cast<int>(e % m_) : art_tgt(e); }
  int art_src(std::int64_t e) const {
    const int u = static_cast<int>(e - real_arcs_);
    return art_src_[u] ? u : root_;
  }
  int art_tgt(std::int64_t e) const {
    const int u = static_cast<int>(e - real_arcs_);
    return art_src_[u] ? root_ : u;
  }
  double cost_c(std::int64_t e) const { return e < real_arcs_ ? cost_[e] : 0.0; }
  double cost_a(std::int64_t e) const {
    return e < real_arcs_ ? 0.0 : (art_src_[e - real_arcs_] ? 0.0 : 1.0);
  }
  void link(int u, int p) {
    parent_[u] = p;
    prev_[u] = -1;
    next_[u] = child_[p];
    if (child_[p] >= 0) prev_[child_[p]] = u;
    child_[p] = u;
  }
  void unlink(int u) {
    const int p = parent_[u];
    if (prev_[u] >= 0)
      next_[prev_[u]] = next_[u];
    else
      child_[p] = next_[u];
    if (next_[u] >= 0) prev_[next_[u]] = prev_[u];
    next_[u] = prev_[u] = -1;
    parent_[u] = -1;
  }

  // Lexicographic (phase 1) or plain (phase 2) reduced cost; returns true when negative.
  bool negative(std::int64_t e, double& ra, double& rc) const {
    const int s = src(e), t = tgt(e);
    rc = cost_c(e) + pc_[s] - pc_[t];
    if (phase_ == 1) {
      ra = cost_a(e) + pa_[s] - pa_[t];
      return ra < -0.5 || (std::abs(ra) < 0.5 && rc < -eps_);
    }
    ra = 0.0;
    return rc < -eps_;
  }

  bool better(double ra, double rc, double ba, double bc) const {
    if (phase_ == 1 && std::abs(ra - ba) > 0.5) return ra < ba;
    return rc < bc;
  }

  bool find_entering() {
    const std::int64_t total = phase_ == 1 ? real_arcs_ + nodes_ : real_arcs_;
    if (total == 0) return false;
    const std::int64_t block = std::max<std::int64_t>(16, static_cast<std::int64_t>(std::sqrt(static_cast<double>(total))));
    double ba = 0.0, bc = 0.0;
    std::int64_t best = -1, count = 0;
    for (std::int64_t scanned = 0; scanned < total; ++scanned) {
      const std::int64_t e = next_arc_ % total;
      next_arc_ = e + 1;
      if (!in_tree_[e] && (e >= real_arcs_ || std::isfinite(cost_[e]))) {
        double ra, rc;
        if (negative(e, ra, rc) && (best < 0 || better(ra, rc, ba, bc))) {
          best = e;
          ba = ra;
          bc = rc;
        }
      }
      if (++count >= block) {
        if (best >= 0) break;
        count = 0;
      }
    }
    in_arc_ = best;
    return best >= 0;
  }

  int find_join(int u, int v) const {
    while (depth_[u] > depth_[v]) u = parent_[u];
    while (depth_[v] > depth_[u]) v = parent_[v];
    while (u != v) {
      u = parent_[u];
      v = parent_[v];
    }
    return u;
  }

  // Residual capacity of the tree arc above u when the cycle pushes flow
  // towards the root (up = true) or away from it.
  double residual(int u, bool up) const {
    const std::int64_t e = pred_arc_[u];
    const bool artificial = e >= real_arcs_;
    if (phase_ == 2 && artificial) return 0.0;
    const bool along = (dir_[u] == kUp) == up;  // pushing along the arc orientation
    return along ? HUGE_VAL : flow_[e];
  }

  void pivot() {
    const std::int64_t in = in_arc_;
    const int first = src(in), second = tgt(in);
    const int join = find_join(first, second);
    double delta = HUGE_VAL;
    int u_out = -1, side = 0;
    // Flow runs second -> join -> first back to the entering arc.
    for (int u = first; u != join; u = parent_[u]) {
      const double d = residual(u, false);
      if (d < delta) {
        delta = d;
        u_out = u;
        side = 1;
      }
    }
    for (int u = second; u != join; u = parent_[u]) {
      const double d = residual(u, true);
      if (d <= delta) {
        delta = d;
        u_out = u;
        side = 2;
      }
    }
    if (u_out < 0) throw std::runtime_error("network simplex: unbounded cycle");
    if (delta > 0) {
      flow_[in] += delta;
      for (int u = first; u != join; u = parent_[u]) {
        auto& f = flow_[pred_arc_[u]];
        f -= dir_[u] * delta;
      }
      for (int u = second; u != join; u = parent_[u]) {
        auto& f = flow_[pred_arc_[u]];
        f += dir_[u] * delta;
      }
    }
    const std::int64_t out_arc = pred_arc_[u_out];
    // Snap the leaving arc to its bound so stale round-off never re-enters.
    flow_[out_arc] = out_arc >= real_arcs_ && phase_ == 2 ? flow_[out_arc] : 0.0;
    in_tree_[out_arc] = 0;
    in_tree_[in] = 1;

    const int u_in = side == 1 ? first : second;
    const int v_in = side == 1 ? second : first;
    reroot(u_out, u_in, v_in, in);
    ++pivots_;
  }

  // Cut the subtree below u_out, re-hang it from u_in under v_in via arc `in`.
  void reroot(int u_out, int u_in, int v_in, std::int64_t in) {
    // Reverse the parent chain u_in -> ... -> u_out.
    int cur = u_in;
    int new_parent = v_in;
    std::int64_t new_arc = in;
    int new_dir = src(in) == u_in ? kUp : kDown;
    while (true) {
      const int old_parent = parent_[cur];
      const std::int64_t old_arc = pred_arc_[cur];
      const int old_dir = dir_[cur];
      const bool last = cur == u_out;
      unlink(cur);
      link(cur, new_parent);
      pred_arc_[cur] = new_arc;
      dir_[cur] = new_dir;
      if (last) break;
      new_parent = cur;
      new_arc = old_arc;
      new_dir = -old_dir;
      cur = old_parent;
    }
    // New potential of u_in makes the entering arc tight; the subtree shifts rigidly.
    const double ca = cost_a(in), cc = cost_c(in);
    double ta, tc;
    if (src(in) == u_in) {
      ta = pa_[v_in] - ca;
      tc = pc_[v_in] - cc;
    } else {
      ta = pa_[v_in] + ca;
      tc = pc_[v_in] + cc;
    }
    const double sa = ta - pa_[u_in], sc = tc - pc_[u_in];
    stack_.clear();
    stack_.push_back(u_in);
    while (!stack_.empty()) {
      const int u = stack_.back();
      stack_.pop_back();
      pa_[u] += sa;
      pc_[u] += sc;
      depth_[u] = depth_[parent_[u]] + 1;
      for (int c = child_[u]; c >= 0; c = next_[c]) stack_.push_back(c);
    }
  }

  void solve() {
    const std::uint64_t cap = 200ull * static_cast<std::uint64_t>(real_arcs_ + nodes_) + 100000;
    std::uint64_t local = 0;
    while (find_entering()) {
      pivot();
      if (++local > cap) throw std::runtime_error("network simplex: pivot limit exceeded");
    }
  }

  int k_, m_, nodes_, root_;
  std::int64_t real_arcs_;
  std::span<const double> cost_;
  double eps_;
  int phase_ = 1;
  std::vector<int> parent_, dir_, depth_, child_, next_, prev_;
  std::vector<std::int64_t> pred_arc_;
  std::vector<double> pa_, pc_, flow_;
  std::vector<char> in_tree_, art_src_;
  std::vector<int> stack_;
  std::int64_t in_arc_ = -1, next_arc_ = 0;
  std::uint64_t pivots_ = 0;
};

}  // namespace

NetworkSimplexResult network_simplex(std::span<const double> supply, std::span<const double> demand,
                                     std::span<const double> cost) {
  const std::size_t k = supply.size(), m = demand.size();
  if (cost.size() != k * m) throw std::invalid_argument("network_simplex: cost must be supply x demand");
  for (double v : supply)
    if (!(v >= 0)) throw std::invalid_argument("network_simplex: negative supply");
  for (double v : demand)
    if (!(v >= 0)) throw std::invalid_argument("network_simplex: negative demand");
  const double ts = std::accumulate(supply.begin(), supply.end(), 0.0);
  const double td = std::accumulate(demand.begin(), demand.end(), 0.0);
  if (std::abs(ts - td) > 1e-9 * std::max(1.0, ts)) throw std::invalid_argument("network_simplex: unbalanced marginals");
  for (double c : cost)
    if (std::isnan(c) || c == -HUGE_VAL) throw std::invalid_argument("network_simplex: invalid cost entry");
  for (std::size_t i = 0; i < k; ++i) {
    if (supply[i] == 0) continue;
    bool any = false;
    for (std::size_t j = 0; j < m && !any; ++j) any = std::isfinite(cost[i * m + j]);
    if (!any) throw InfeasibleTransport("transport: source atom " + std::to_string(i) + " has only infinite costs");
  }
  for (std::size_t j = 0; j < m; ++j) {
    if (demand[j] == 0) continue;
    bool any = false;
    for (std::size_t i = 0; i < k && !any; ++i) any = std::isfinite(cost[i * m + j]);
    if (!any) throw InfeasibleTransport("transport: target atom " + std::to_string(j) + " has only infinite costs");
  }
  Solver s(supply, demand, cost);
  s.run();
  return s.result(supply, demand);
}

}  // namespace tilt

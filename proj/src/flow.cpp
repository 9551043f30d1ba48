#include "loceq/flow.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <string>

#include "loceq/errors.hpp"

namespace loceq {

CapacityGraph::CapacityGraph(std::size_t dim, std::vector<CapacityEdge> edges,
                             std::size_t source, std::size_t sink)
    : dim_(dim), edges_(std::move(edges)), source_(source), sink_(sink) {
  if (source >= dim || sink >= dim) throw DomainError("flow endpoint out of range");
  if (source == sink) throw DomainError("source and sink coincide");
  for (const auto& e : edges_) {
    if (e.a >= dim || e.b >= dim || e.a == e.b) {
      throw DomainError("invalid capacity edge (" + std::to_string(e.a) + ", " +
                        std::to_string(e.b) + ")");
    }
    if (!(e.capacity > 0.0) || !std::isfinite(e.capacity)) {
      throw DomainError("capacities must be positive and finite");
    }
  }
}

CapacityGraph capacity_graph(const SparseHermitian& h, std::size_t source,
                             std::size_t sink) {
  std::vector<CapacityEdge> edges;
  for (const auto& e : h.entries()) {
    if (e.row == e.col) continue;
    edges.push_back({static_cast<std::uint32_t>(e.row),
                     static_cast<std::uint32_t>(e.col), std::abs(e.value)});
  }
  return CapacityGraph(h.dim(), std::move(edges), source, sink);
}

namespace {

// Residual network: edge i owns arcs 2i (a -> b) and 2i + 1 (b -> a), each
// the reverse of the other; both start with the edge capacity.
class PreflowPush {
 public:
  explicit PreflowPush(const CapacityGraph& g)
      : n_(static_cast<std::uint32_t>(g.dim())),
        s_(static_cast<std::uint32_t>(g.source())),
        t_(static_cast<std::uint32_t>(g.sink())) {
    const auto& edges = g.edges();
    start_.assign(n_ + 1, 0);
    for (const auto& e : edges) {
      ++start_[e.a + 1];
      ++start_[e.b + 1];
    }
    for (std::uint32_t v = 0; v < n_; ++v) start_[v + 1] += start_[v];
    const std::size_t arcs = 2 * edges.size();
    head_.resize(arcs);
    mate_.resize(arcs);
    res_.resize(arcs);
    arc_of_.resize(arcs);
    std::vector<std::size_t> fill(start_.begin(), start_.end() - 1);
    for (std::size_t i = 0; i < edges.size(); ++i) {
      const auto& e = edges[i];
      const std::size_t ab = fill[e.a]++, ba = fill[e.b]++;
      head_[ab] = e.b;
      head_[ba] = e.a;
      mate_[ab] = ba;
      mate_[ba] = ab;
      res_[ab] = res_[ba] = e.capacity;
      arc_of_[2 * i] = ab;
      arc_of_[2 * i + 1] = ba;
    }
    excess_.assign(n_, 0.0);
    height_.assign(n_, 0);
    current_.assign(n_, 0);
    active_.assign(2 * std::size_t{n_} + 1, {});
    list_head_.assign(n_, kNone);
    next_.assign(n_, kNone);
    prev_.assign(n_, kNone);
  }

  void run() {
    global_relabel();
    for (std::size_t a = start_[s_]; a < start_[s_ + 1]; ++a) {
      if (res_[a] > 0.0) push(s_, a, res_[a]);
    }
    std::size_t work = 0;
    const std::size_t relabel_period = std::max<std::size_t>(n_, 64);
    while (max_active_ >= 0) {
      auto& bucket = active_[static_cast<std::size_t>(max_active_)];
      if (bucket.empty()) {
        --max_active_;
        continue;
      }
      const std::uint32_t u = bucket.back();
      bucket.pop_back();
      in_active_[u] = 0;
      if (excess_[u] <= kFlowEpsilon) continue;
      if (height_[u] != static_cast<std::uint32_t>(max_active_)) {
        activate(u);  // moved by a gap; file it under its new height
        continue;
      }
      work += discharge(u);
      if (work > relabel_period) {
        work = 0;
        global_relabel();
      }
    }
  }

  FlowResult result(const CapacityGraph& g) const {
    FlowResult out;
    out.value = excess_[t_];
    const auto& edges = g.edges();
    out.edge_flow.resize(edges.size());
    for (std::size_t i = 0; i < edges.size(); ++i) {
      out.edge_flow[i] = edges[i].capacity - res_[arc_of_[2 * i]];
    }
    out.source_side.assign(n_, 0);
    std::deque<std::uint32_t> queue{s_};
    out.source_side[s_] = 1;
    while (!queue.empty()) {
      const auto u = queue.front();
      queue.pop_front();
      for (std::size_t a = start_[u]; a < start_[u + 1]; ++a) {
        const auto v = head_[a];
        if (res_[a] > kFlowEpsilon && !out.source_side[v]) {
          out.source_side[v] = 1;
          queue.push_back(v);
        }
      }
    }
    for (const auto& e : edges) {
      if (out.source_side[e.a] != out.source_side[e.b]) out.cut_capacity += e.capacity;
    }
    return out;
  }

 private:
  static constexpr std::uint32_t kNone = 0xffffffffu;

  void list_insert(std::uint32_t v) {
    const auto h = height_[v];
    if (h >= n_) return;
    next_[v] = list_head_[h];
    prev_[v] = kNone;
    if (list_head_[h] != kNone) prev_[list_head_[h]] = v;
    list_head_[h] = v;
  }

  void list_remove(std::uint32_t v) {
    const auto h = height_[v];
    if (h >= n_) return;
    if (prev_[v] != kNone) {
      next_[prev_[v]] = next_[v];
    } else {
      list_head_[h] = next_[v];
    }
    if (next_[v] != kNone) prev_[next_[v]] = prev_[v];
  }

  void activate(std::uint32_t v) {
    if (v == s_ || v == t_ || in_active_[v]) return;
    in_active_[v] = 1;
    active_[height_[v]].push_back(v);
    max_active_ = std::max(max_active_, static_cast<long>(height_[v]));
  }

  void push(std::uint32_t u, std::size_t a, double amount) {
    const auto v = head_[a];
    res_[a] -= amount;
    res_[mate_[a]] += amount;
    excess_[u] -= amount;
    excess_[v] += amount;
    if (excess_[v] > kFlowEpsilon) activate(v);
  }

  // Exact distances: to the sink where reachable, otherwise n + distance to
  // the source (excess that must return), otherwise 2n.
  void global_relabel() {
    const std::uint32_t unset = 2 * n_;
    std::fill(height_.begin(), height_.end(), unset);
    auto bfs = [&](std::uint32_t root, std::uint32_t base) {
      std::deque<std::uint32_t> queue{root};
      height_[root] = base;
      while (!queue.empty()) {
        const auto v = queue.front();
        queue.pop_front();
        for (std::size_t a = start_[v]; a < start_[v + 1]; ++a) {
          const auto u = head_[a];
          // arc u -> v is the mate of a
          if (height_[u] == unset && u != s_ && res_[mate_[a]] > kFlowEpsilon) {
            height_[u] = height_[v] + 1;
            queue.push_back(u);
          }
        }
      }
    };
    bfs(t_, 0);
    height_[s_] = unset;
    bfs(s_, n_);
    std::fill(list_head_.begin(), list_head_.end(), kNone);
    for (auto& b : active_) b.clear();
    in_active_.assign(n_, 0);
    max_active_ = -1;
    for (std::uint32_t v = 0; v < n_; ++v) {
      current_[v] = start_[v];
      if (v == s_) continue;
      list_insert(v);
      if (excess_[v] > kFlowEpsilon) activate(v);
    }
  }

  // Every node above a now-empty height below n is cut off from the sink.
  void gap(std::uint32_t empty) {
    for (std::uint32_t h = empty + 1; h < n_; ++h) {
      std::uint32_t v = list_head_[h];
      if (v == kNone) continue;
      list_head_[h] = kNone;
      while (v != kNone) {
        const auto nxt = next_[v];
        height_[v] = n_ + 1;
        current_[v] = start_[v];
        if (in_active_[v]) {
          in_active_[v] = 0;
          activate(v);
        }
        v = nxt;
      }
    }
  }

  std::size_t discharge(std::uint32_t u) {
    std::size_t relabels = 0;
    while (excess_[u] > kFlowEpsilon) {
      if (current_[u] == start_[u + 1]) {
        // Relabel.
        ++relabels;
        std::uint32_t best = 2 * n_;
        for (std::size_t a = start_[u]; a < start_[u + 1]; ++a) {
          if (res_[a] > kFlowEpsilon) best = std::min(best, height_[head_[a]] + 1);
        }
        const auto old = height_[u];
        list_remove(u);
        height_[u] = best;
        current_[u] = start_[u];
        if (old < n_ && list_head_[old] == kNone) {
          gap(old);
          if (height_[u] < n_) height_[u] = n_ + 1;
        }
        list_insert(u);
        if (height_[u] >= 2 * n_) break;  // isolated: cannot move its excess
        continue;
      }
      const std::size_t a = current_[u];
      const auto v = head_[a];
      if (res_[a] > kFlowEpsilon && height_[u] == height_[v] + 1) {
        push(u, a, std::min(excess_[u], res_[a]));
      } else {
        ++current_[u];
      }
    }
    if (excess_[u] > kFlowEpsilon && height_[u] < 2 * n_) activate(u);
    return relabels;
  }

  std::uint32_t n_, s_, t_;
  std::vector<std::size_t> start_;
  std::vector<std::uint32_t> head_;
  std::vector<std::size_t> mate_;
  std::vector<double> res_;
  std::vector<std::size_t> arc_of_;
  std::vector<double> excess_;
  std::vector<std::uint32_t> height_;
  std::vector<std::size_t> current_;
  std::vector<std::vector<std::uint32_t>> active_;
  std::vector<char> in_active_;
  long max_active_ = -1;
  std::vector<std::uint32_t> list_head_, next_, prev_;
};

}  // namespace

FlowResult max_flow_detailed(const CapacityGraph& g) {
  PreflowPush solver(g);
  solver.run();
  return solver.result(g);
}

FlowEndpoints flow_endpoints(const DiagonalObservable& obs,
                             std::optional<double> diag_o) {
  FlowEndpoints ends;
  const std::size_t n = obs.dimension();
  ends.source = n - 1;
  if (obs.mode() == ObservableMode::kHomogeneous) {
    ends.sink = 0;
    return ends;
  }
  const double target = diag_o.value_or(0.0);
  const auto& o = obs.eigenvalues();
  double best = std::abs(o[0] - target);
  ends.sink = 0;
  for (std::size_t j = 1; j + 1 < n; ++j) {
    const double d = std::abs(o[j] - target);
    if (d < best) {
      best = d;
      ends.sink = j;
    }
  }
  return ends;
}

CorrelationReport correlate(std::span<const FlowSample> samples) {
  if (samples.size() < 10) throw DomainError("correlation needs at least 10 pairs");
  std::vector<double> t, f;
  std::map<std::pair<int, int>, std::pair<std::vector<double>, std::vector<double>>> groups;
  for (const auto& s : samples) {
    t.push_back(s.t_eq);
    f.push_back(s.f_max);
    auto& g = groups[{s.bodies, s.diameter}];
    g.first.push_back(s.t_eq);
    g.second.push_back(s.f_max);
  }
  CorrelationReport report;
  report.pearson = pearson(t, f);
  for (const auto& [key, values] : groups) {
    report.groups.push_back({key.first, key.second, mean_stderr(values.first),
                             mean_stderr(values.second)});
  }
  return report;
}

FlowFit fit_teq_vs_fmax(std::span<const FlowSample> samples) {
  std::map<int, std::pair<std::vector<double>, std::vector<double>>> by_size;
  for (const auto& s : samples) {
    by_size[s.sites].first.push_back(s.t_eq);
    by_size[s.sites].second.push_back(s.f_max);
  }
  if (by_size.size() < 3) throw DomainError("flow fit needs at least three sizes");
  FlowFit fit;
  fit.pair_count = samples.size();
  std::vector<double> x, y;
  for (const auto& [L, values] : by_size) {
    SizeSummary s{L, mean_stderr(values.first), mean_stderr(values.second)};
    x.push_back(s.f_max.mean);
    y.push_back(s.t_eq.mean);
    fit.sizes.push_back(s);
  }
  fit.line = fit_linear(x, y);
  return fit;
}

Extrapolation extrapolate_teq(const FlowFit& fit, double f_max, double trust_fraction) {
  Extrapolation out;
  out.t_eq = fit.line(f_max);
  const double width = fit.line.x_max - fit.line.x_min;
  out.trusted = f_max >= fit.line.x_min - trust_fraction * width &&
                f_max <= fit.line.x_max + trust_fraction * width;
  return out;
}

}  // namespace loceq

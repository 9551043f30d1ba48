#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "loceq/sparse.hpp"
#include "loceq/spin_model.hpp"
#include "loceq/stats.hpp"

namespace loceq {

struct CapacityEdge {
  std::uint32_t a = 0;
  std::uint32_t b = 0;
  double capacity = 0.0;
};

/// Undirected capacitated graph with a source and a sink. Each edge can
/// carry flow in either direction up to its capacity.
class CapacityGraph {
 public:
  /// Throws DomainError on nonpositive capacities, self-loops, out-of-range
  /// nodes or source == sink.
  CapacityGraph(std::size_t dim, std::vector<CapacityEdge> edges,
                std::size_t source, std::size_t sink);

  std::size_t dim() const { return dim_; }
  std::size_t source() const { return source_; }
  std::size_t sink() const { return sink_; }
  const std::vector<CapacityEdge>& edges() const { return edges_; }

 private:
  std::size_t dim_;
  std::vector<CapacityEdge> edges_;
  std::size_t source_;
  std::size_t sink_;
};

/// Capacities |H_jk| for every stored off-diagonal entry; diagonal ignored.
CapacityGraph capacity_graph(const SparseHermitian& h, std::size_t source,
                             std::size_t sink);

/// Residual threshold of the preflow-push solver.
inline constexpr double kFlowEpsilon = 1e-12;

struct FlowResult {
  double value = 0.0;
  /// Net flow a -> b on every edge (negative: b -> a).
  std::vector<double> edge_flow;
  /// Nodes reachable from the source in the final residual graph.
  std::vector<char> source_side;
  double cut_capacity = 0.0;
};

/// Highest-label preflow-push with gap relabeling and periodic global
/// relabeling. The returned flow is conserving (up to kFlowEpsilon per node)
/// and its value equals the capacity of the returned cut.
FlowResult max_flow_detailed(const CapacityGraph& g);
inline double max_flow(const CapacityGraph& g) { return max_flow_detailed(g).value; }

struct FlowEndpoints {
  std::size_t source = 0;
  std::size_t sink = 0;
};

/// Source: the maximally magnetised node N - 1. Sink: for the homogeneous
/// magnetisation node 0; otherwise the node whose eigenvalue is closest to
/// the diagonal average (0 when not supplied).
FlowEndpoints flow_endpoints(const DiagonalObservable& obs,
                             std::optional<double> diag_o = std::nullopt);

struct FlowSample {
  int sites = 0;
  int bodies = 0;
  int diameter = 0;
  double t_eq = 0.0;
  double f_max = 0.0;
};

struct GroupSummary {
  int bodies = 0;
  int diameter = 0;
  MeanStderr t_eq;
  MeanStderr f_max;
};

struct CorrelationReport {
  Correlation pearson;
  std::vector<GroupSummary> groups;  // sorted by (n, d)
};

/// Pooled Pearson correlation of (T_eq, f_max) and per-(n, d) means.
/// Throws DomainError for fewer than 10 pairs or zero variance.
CorrelationReport correlate(std::span<const FlowSample> samples);

struct SizeSummary {
  int sites = 0;
  MeanStderr t_eq;
  MeanStderr f_max;
};

/// Least-squares line T_eq = slope * f_max + intercept through per-L means.
struct FlowFit {
  LinearFit line;
  std::size_t pair_count = 0;
  std::vector<SizeSummary> sizes;  // ascending L

  double slope() const { return line.slope; }
  double intercept() const { return line.intercept; }
};

/// Throws DomainError with fewer than three distinct sizes.
FlowFit fit_teq_vs_fmax(std::span<const FlowSample> samples);

struct Extrapolation {
  double t_eq = 0.0;
  /// False when f_max lies further outside the fitted f_max range than
  /// trust_fraction times its width.
  bool trusted = true;
};

Extrapolation extrapolate_teq(const FlowFit& fit, double f_max,
                              double trust_fraction = 1.0);

}  // namespace loceq

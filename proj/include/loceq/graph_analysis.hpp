#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "loceq/sparse.hpp"
#include "loceq/spin_model.hpp"

namespace loceq {

/// Unweighted off-diagonal structure of a Hermitian matrix: node j and k
/// (j != k) are adjacent iff H_jk != 0.
class AdjacencyGraph {
 public:
  AdjacencyGraph() = default;
  explicit AdjacencyGraph(std::size_t dim);

  /// Builds from undirected edges (either orientation, duplicates ignored).
  /// Throws DomainError on self-loops or out-of-range nodes.
  static AdjacencyGraph from_edges(
      std::size_t dim,
      const std::vector<std::pair<std::uint32_t, std::uint32_t>>& edges);

  std::size_t dim() const { return neighbors_.size(); }
  /// Sorted neighbours of node j.
  const std::vector<std::uint32_t>& neighbors(std::size_t j) const {
    return neighbors_[j];
  }
  bool has_edge(std::size_t j, std::size_t k) const;
  std::size_t edge_count() const;
  /// Edges (j, k) with j < k in lexicographic order.
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges() const;

  const std::vector<char>& diagonal() const { return diagonal_; }
  std::vector<char>& diagonal() { return diagonal_; }

  friend bool operator==(const AdjacencyGraph&, const AdjacencyGraph&) = default;

 private:
  friend AdjacencyGraph adjacency_of(const SparseHermitian& h);
  std::vector<std::vector<std::uint32_t>> neighbors_;
  std::vector<char> diagonal_;
};

AdjacencyGraph adjacency_of(const SparseHermitian& h);

/// Exact node degree of every adjacency graph of the (L, n, d) family,
/// sum_{q<n} [L*C(d,q) - q*C(d+1,q+1)], in integer arithmetic.
std::int64_t degree_formula(int sites, int bodies, int diameter);
inline std::int64_t degree_formula(const LocalitySpec& s) {
  return degree_formula(s.sites, s.bodies, s.diameter);
}

std::vector<std::size_t> degrees(const AdjacencyGraph& g);

/// Adjacency of the (L, n, d) family in the basis of `obs`, assembled from
/// boolean local operators (every flip pattern inside a support is present
/// for generic couplings). Diagonal flags are all set.
AdjacencyGraph exact_adjacency(const LocalitySpec& spec,
                               const DiagonalObservable& obs);

/// max_j <o_j| H^dagger O H - O |o_j> = max_j (sum_k |H_kj|^2 o_k - o_j).
double delta_o(const SparseHermitian& h, const DiagonalObservable& obs);

/// Largest eigenvalue change a single term of the (L, n, d) family can cause:
/// max over supports of (2/L) * sum of |a_i| on the support. Every nonzero
/// H_jk of the family satisfies |o_k - o_j| <= this value, and it equals
/// 2n/L for the homogeneous magnetisation. Used as the band radius.
double flip_radius(const LocalitySpec& spec, const DiagonalObservable& obs);

enum class BandKind { kFunctional, kConstant, kBlock, kEmpirical };

/// Per-node band description.
///
/// `width[j]` is the bandwidth value as defined for the kind (see the
/// constructors). `first[j]`..`last[j]` is the closed window of node indices
/// that node j may connect to; windows are already clamped to [0, N).
struct BandwidthProfile {
  BandKind kind = BandKind::kFunctional;
  std::vector<std::size_t> width;
  std::vector<std::size_t> first;
  std::vector<std::size_t> last;

  std::size_t dim() const { return width.size(); }
  bool contains(std::size_t j, std::size_t k) const {
    return k >= first[j] && k <= last[j];
  }
  /// Largest one-sided extent of any window.
  std::size_t max_half_width() const;
};

/// Integrated-density bandwidth: width[j] = G(o_j + delta) - G(o_j) with
/// G(o) = #{k : o_k <= o}. The window of j is every node whose eigenvalue
/// lies in [o_j - delta, o_j + delta].
BandwidthProfile functional_bandwidth(const DiagonalObservable& obs,
                                      double delta);

/// width[j] = max |k - j| over the neighbours of j (0 if isolated); the
/// window spans the extreme neighbours.
BandwidthProfile empirical_bandwidth(const AdjacencyGraph& g);

/// Node-independent band |k - j| <= half_width.
BandwidthProfile constant_bandwidth(std::size_t dim, std::size_t half_width);

/// Block-shaped bandwidth of the homogeneous magnetisation. For a node in
/// the block with q up spins, width = sum_{p=0}^{bodies} C(L, q + p), the
/// number of nodes from the start of its block to the end of block
/// q + bodies; the window covers blocks q - bodies .. q + bodies.
/// Throws DomainError for randomised observables.
BandwidthProfile block_bandwidth(const DiagonalObservable& obs, int bodies);

/// |o_j - diag_avg| for every node.
std::vector<double> distance_to_equilibrium(const DiagonalObservable& obs,
                                            double diag_avg);

/// Edges (j, k) that fall outside the window of j or of k.
std::size_t band_violations(const AdjacencyGraph& g,
                            const BandwidthProfile& band);

/// Edges whose eigenvalue gap |o_k - o_j| exceeds `delta`.
std::size_t window_violations(const AdjacencyGraph& g,
                              const DiagonalObservable& obs, double delta);

/// Edge list: a "# {json}" header line, then "j k" per edge, 1-based, j < k.
void write_edge_list(std::ostream& out, const AdjacencyGraph& g,
                     const std::string& metadata_json);
/// Binary PBM (P4) image of the adjacency mask, diagonal included; black
/// pixels mark nonzero elements.
void write_mask_pbm(std::ostream& out, const AdjacencyGraph& g);

}  // namespace loceq

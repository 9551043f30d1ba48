#include "loceq/graph_analysis.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <ostream>
#include <string>

#include "loceq/errors.hpp"

namespace loceq {

namespace {

std::int64_t binomial(std::int64_t n, std::int64_t k) {
  if (k < 0 || k > n) return 0;
  k = std::min(k, n - k);
  std::int64_t r = 1;
  for (std::int64_t i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

}  // namespace

AdjacencyGraph::AdjacencyGraph(std::size_t dim)
    : neighbors_(dim), diagonal_(dim, 0) {}

AdjacencyGraph AdjacencyGraph::from_edges(
    std::size_t dim,
    const std::vector<std::pair<std::uint32_t, std::uint32_t>>& edges) {
  AdjacencyGraph g(dim);
  for (auto [a, b] : edges) {
    if (a == b || a >= dim || b >= dim) {
      throw DomainError("invalid edge (" + std::to_string(a) + ", " +
                        std::to_string(b) + ")");
    }
    g.neighbors_[a].push_back(b);
    g.neighbors_[b].push_back(a);
  }
  for (auto& list : g.neighbors_) {
    std::sort(list.begin(), list.end());
    list.erase(std::unique(list.begin(), list.end()), list.end());
  }
  return g;
}

bool AdjacencyGraph::has_edge(std::size_t j, std::size_t k) const {
  const auto& list = neighbors_[j];
  return std::binary_search(list.begin(), list.end(),
                            static_cast<std::uint32_t>(k));
}

std::size_t AdjacencyGraph::edge_count() const {
  std::size_t total = 0;
  for (const auto& list : neighbors_) total += list.size();
  return total / 2;
}

std::vector<std::pair<std::uint32_t, std::uint32_t>> AdjacencyGraph::edges()
    const {
  std::vector<std::pair<std::uint32_t, std::uint32_t>> out;
  out.reserve(edge_count());
  for (std::uint32_t j = 0; j < neighbors_.size(); ++j) {
    for (auto k : neighbors_[j]) {
      if (k > j) out.emplace_back(j, k);
    }
  }
  return out;
}

AdjacencyGraph adjacency_of(const SparseHermitian& h) {
  AdjacencyGraph g(h.dim());
  for (const auto& e : h.entries()) {
    if (e.row == e.col) {
      g.diagonal_[e.row] = 1;
    } else {
      g.neighbors_[e.row].push_back(static_cast<std::uint32_t>(e.col));
      g.neighbors_[e.col].push_back(static_cast<std::uint32_t>(e.row));
    }
  }
  for (auto& list : g.neighbors_) std::sort(list.begin(), list.end());
  return g;
}

std::int64_t degree_formula(int sites, int bodies, int diameter) {
  LocalitySpec{sites, bodies, diameter}.validate();
  std::int64_t total = 0;
  for (std::int64_t q = 0; q < bodies; ++q) {
    total += sites * binomial(diameter, q) - q * binomial(diameter + 1, q + 1);
  }
  return total;
}

std::vector<std::size_t> degrees(const AdjacencyGraph& g) {
  std::vector<std::size_t> out(g.dim());
  for (std::size_t j = 0; j < g.dim(); ++j) out[j] = g.neighbors(j).size();
  return out;
}

AdjacencyGraph exact_adjacency(const LocalitySpec& spec,
                               const DiagonalObservable& obs) {
  const auto supports = enumerate_supports(spec);
  if (obs.sites() != spec.sites) {
    throw DomainError("observable and locality chain lengths differ");
  }
  // Every nonempty flip pattern inside a support occurs: put x on flipped
  // sites and z elsewhere. Collect the distinct global flip masks once.
  std::vector<std::uint32_t> flips;
  for (const auto support : supports) {
    for (std::uint32_t sub = support; sub != 0; sub = (sub - 1) & support) {
      flips.push_back(sub);
    }
  }
  std::sort(flips.begin(), flips.end());
  flips.erase(std::unique(flips.begin(), flips.end()), flips.end());

  const std::size_t dim = spec.dimension();
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
  edges.reserve(dim * flips.size() / 2);
  for (std::uint32_t mask = 0; mask < dim; ++mask) {
    for (const auto f : flips) {
      const std::uint32_t other = mask ^ f;
      if (other > mask) edges.emplace_back(obs.node_of(mask), obs.node_of(other));
    }
  }
  AdjacencyGraph g = AdjacencyGraph::from_edges(dim, edges);
  std::fill(g.diagonal().begin(), g.diagonal().end(), 1);
  return g;
}

double delta_o(const SparseHermitian& h, const DiagonalObservable& obs) {
  if (h.dim() != obs.dimension()) {
    throw DomainError("Hamiltonian and observable dimensions differ");
  }
  const auto& o = obs.eigenvalues();
  // column_weighted[j] = sum_k |H_kj|^2 o_k
  std::vector<double> weighted(h.dim(), 0.0);
  for (const auto& e : h.entries()) {
    const double w = std::norm(e.value);
    weighted[e.col] += w * o[e.row];
    if (e.row != e.col) weighted[e.row] += w * o[e.col];
  }
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < h.dim(); ++j) {
    best = std::max(best, weighted[j] - o[j]);
  }
  return best;
}

double flip_radius(const LocalitySpec& spec, const DiagonalObservable& obs) {
  if (obs.sites() != spec.sites) {
    throw DomainError("observable and locality chain lengths differ");
  }
  const auto& w = obs.weights();
  double best = 0.0;
  for (const auto support : enumerate_supports(spec)) {
    double sum = 0.0;
    for (int i = 0; i < spec.sites; ++i) {
      if (support & (1u << i)) sum += std::abs(w[static_cast<std::size_t>(i)]);
    }
    best = std::max(best, sum);
  }
  return 2.0 * best / spec.sites;
}

std::size_t BandwidthProfile::max_half_width() const {
  std::size_t best = 0;
  for (std::size_t j = 0; j < dim(); ++j) {
    best = std::max({best, j - first[j], last[j] - j});
  }
  return best;
}

BandwidthProfile functional_bandwidth(const DiagonalObservable& obs,
                                      double delta) {
  if (delta < 0.0) throw DomainError("bandwidth delta must be nonnegative");
  const auto& o = obs.eigenvalues();
  const std::size_t n = o.size();
  BandwidthProfile band;
  band.kind = BandKind::kFunctional;
  band.width.resize(n);
  band.first.resize(n);
  band.last.resize(n);
  // Flips that saturate the radius land exactly on the window edge; keep
  // them inside despite rounding.
  const double slack = 1e-12 * std::max(1.0, delta);
  for (std::size_t j = 0; j < n; ++j) {
    // G(x) = number of eigenvalues <= x
    const auto g_hi = static_cast<std::size_t>(
        std::upper_bound(o.begin(), o.end(), o[j] + delta + slack) - o.begin());
    const auto g_here = static_cast<std::size_t>(
        std::upper_bound(o.begin(), o.end(), o[j]) - o.begin());
    const auto below = static_cast<std::size_t>(
        std::lower_bound(o.begin(), o.end(), o[j] - delta - slack) - o.begin());
    band.width[j] = g_hi - g_here;
    band.first[j] = below;
    band.last[j] = g_hi - 1;
  }
  return band;
}

BandwidthProfile empirical_bandwidth(const AdjacencyGraph& g) {
  BandwidthProfile band;
  band.kind = BandKind::kEmpirical;
  const std::size_t n = g.dim();
  band.width.resize(n);
  band.first.resize(n);
  band.last.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    const auto& nb = g.neighbors(j);
    if (nb.empty()) {
      band.width[j] = 0;
      band.first[j] = band.last[j] = j;
      continue;
    }
    band.first[j] = std::min<std::size_t>(nb.front(), j);
    band.last[j] = std::max<std::size_t>(nb.back(), j);
    band.width[j] = std::max(j - band.first[j], band.last[j] - j);
  }
  return band;
}

BandwidthProfile constant_bandwidth(std::size_t dim, std::size_t half_width) {
  BandwidthProfile band;
  band.kind = BandKind::kConstant;
  band.width.assign(dim, half_width);
  band.first.resize(dim);
  band.last.resize(dim);
  for (std::size_t j = 0; j < dim; ++j) {
    band.first[j] = j >= half_width ? j - half_width : 0;
    band.last[j] = std::min(dim - 1, j + half_width);
  }
  return band;
}

BandwidthProfile block_bandwidth(const DiagonalObservable& obs, int bodies) {
  if (obs.mode() != ObservableMode::kHomogeneous) {
    throw DomainError("block bandwidth needs the homogeneous magnetisation");
  }
  if (bodies < 1) throw DomainError("body count must be positive");
  const int sites = obs.sites();
  // block_start[q] = first node with q up spins; block_start[L+1] = N.
  std::vector<std::size_t> block_start(static_cast<std::size_t>(sites) + 2, 0);
  for (int q = 0; q <= sites; ++q) {
    block_start[static_cast<std::size_t>(q) + 1] =
        block_start[static_cast<std::size_t>(q)] +
        static_cast<std::size_t>(binomial(sites, q));
  }
  const std::size_t n = obs.dimension();
  BandwidthProfile band;
  band.kind = BandKind::kBlock;
  band.width.resize(n);
  band.first.resize(n);
  band.last.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    const int q = obs.up_count(j);
    std::size_t width = 0;
    for (int p = 0; p <= bodies && q + p <= sites; ++p) {
      width += static_cast<std::size_t>(binomial(sites, q + p));
    }
    band.width[j] = width;
    const int lo_block = std::max(0, q - bodies);
    const int hi_block = std::min(sites, q + bodies);
    band.first[j] = block_start[static_cast<std::size_t>(lo_block)];
    band.last[j] = block_start[static_cast<std::size_t>(hi_block) + 1] - 1;
  }
  return band;
}

std::vector<double> distance_to_equilibrium(const DiagonalObservable& obs,
                                            double diag_avg) {
  std::vector<double> out(obs.dimension());
  for (std::size_t j = 0; j < out.size(); ++j) {
    out[j] = std::abs(obs.eigenvalues()[j] - diag_avg);
  }
  return out;
}

std::size_t band_violations(const AdjacencyGraph& g,
                            const BandwidthProfile& band) {
  if (band.dim() != g.dim()) {
    throw DomainError("band profile and graph dimensions differ");
  }
  std::size_t bad = 0;
  for (const auto& [j, k] : g.edges()) {
    if (!band.contains(j, k) || !band.contains(k, j)) ++bad;
  }
  return bad;
}

std::size_t window_violations(const AdjacencyGraph& g,
                              const DiagonalObservable& obs, double delta) {
  const auto& o = obs.eigenvalues();
  std::size_t bad = 0;
  for (const auto& [j, k] : g.edges()) {
    if (std::abs(o[k] - o[j]) > delta) ++bad;
  }
  return bad;
}

void write_edge_list(std::ostream& out, const AdjacencyGraph& g,
                     const std::string& metadata_json) {
  out << "# " << metadata_json << '\n';
  for (const auto& [j, k] : g.edges()) out << j + 1 << ' ' << k + 1 << '\n';
}

void write_mask_pbm(std::ostream& out, const AdjacencyGraph& g) {
  const std::size_t n = g.dim();
  out << "P4\n" << n << ' ' << n << '\n';
  const std::size_t row_bytes = (n + 7) / 8;
  std::vector<unsigned char> row(row_bytes);
  for (std::size_t j = 0; j < n; ++j) {
    std::fill(row.begin(), row.end(), 0);
    auto set = [&](std::size_t k) {
      row[k / 8] |= static_cast<unsigned char>(0x80u >> (k % 8));
    };
    if (g.diagonal()[j]) set(j);
    for (auto k : g.neighbors(j)) set(k);
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(row_bytes));
  }
}

}  // namespace loceq

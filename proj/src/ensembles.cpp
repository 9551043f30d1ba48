#include "loceq/ensembles.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "loceq/errors.hpp"
#include "loceq/io.hpp"
#include "loceq/rng.hpp"

namespace loceq {

namespace {

using Edge = std::pair<std::uint32_t, std::uint32_t>;

std::uint64_t edge_key(std::uint32_t a, std::uint32_t b) {
  if (a > b) std::swap(a, b);
  return (std::uint64_t{a} << 32) | b;
}

// Picks `count` distinct elements of `pool` uniformly (partial Fisher-Yates);
// the picked elements end up in pool[0, count).
void choose_prefix(std::vector<std::uint32_t>& pool, std::size_t count, Rng& rng) {
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t pick = i + rng.below(pool.size() - i);
    std::swap(pool[i], pool[pick]);
  }
}

// State of one row-by-row banded construction.
//
// e[j]  edges placed in row j
// z[j]  free slots of row j: in-band partners k that are not yet adjacent
//       and whose rows are not complete
// A row is complete once e[j] >= rho. A row with z == rho - e is forced (it
// must take every free slot now); one with z < rho - e is in conflict.
class BandedBuilder {
 public:
  BandedBuilder(std::size_t rho, const BandwidthProfile& band)
      : rho_(rho), band_(band), n_(band.dim()) {}

  std::size_t min_window() const {
    std::size_t best = n_ ? n_ - 1 : 0;
    for (std::size_t j = 0; j < n_; ++j) {
      std::size_t count = 0;
      for (std::size_t k = band_.first[j]; k <= band_.last[j]; ++k) {
        if (allowed(j, k)) ++count;
      }
      best = std::min(best, count);
    }
    return best;
  }

  // Regular mode. Returns false when a conflict could not be resolved.
  bool attempt_regular(Rng& rng, int shuffle_cap, int& shuffles) {
    reset();
    for (;;) {
      // A move can pass the deficit on to another row, so the cap counts
      // every move until no conflict is left.
      int tries = 0;
      while (!conflicts_.empty()) {
        if (++tries > shuffle_cap) return false;
        if (!reshuffle_blocker(*conflicts_.begin(), rng)) return false;
        ++shuffles;
      }
      std::uint32_t r;
      if (!forced_.empty()) {
        r = *forced_.begin();
      } else {
        while (cursor_ < n_ && complete(cursor_)) ++cursor_;
        if (cursor_ == n_) return true;
        r = static_cast<std::uint32_t>(cursor_);
      }
      fill_row(r, rng, false);
    }
  }

  // Variable-degree mode: no conflict resolution; short rows borrow excess
  // edges from completed rows.
  void attempt_variable(Rng& rng) {
    reset();
    std::vector<char> done(n_, 0);
    std::size_t cursor = 0;
    for (;;) {
      std::uint32_t r;
      auto it = std::find_if(forced_.begin(), forced_.end(),
                             [&](std::uint32_t j) { return !done[j]; });
      if (it != forced_.end()) {
        r = *it;
      } else {
        while (cursor < n_ && (done[cursor] || complete(cursor))) ++cursor;
        if (cursor == n_) return;
        r = static_cast<std::uint32_t>(cursor);
      }
      fill_row(r, rng, true);
      done[r] = 1;
      forced_.erase(r);
    }
  }

  AdjacencyGraph graph() const {
    std::vector<Edge> edges;
    for (std::uint32_t j = 0; j < n_; ++j) {
      for (auto k : adj_[j]) {
        if (k > j) edges.emplace_back(j, k);
      }
    }
    return AdjacencyGraph::from_edges(n_, edges);
  }

 private:
  bool allowed(std::size_t j, std::size_t k) const {
    return j != k && band_.contains(j, k) && band_.contains(k, j);
  }
  bool complete(std::size_t j) const { return e_[j] >= rho_; }
  std::size_t need(std::size_t j) const { return complete(j) ? 0 : rho_ - e_[j]; }

  void mark(std::uint32_t j) {
    ++token_;
    for (auto k : adj_[j]) stamp_[k] = token_;
  }
  bool marked(std::uint32_t k) const { return stamp_[k] == token_; }

  void reset() {
    adj_.assign(n_, {});
    e_.assign(n_, 0);
    z_.assign(n_, 0);
    stamp_.assign(n_, 0);
    token_ = 0;
    cursor_ = 0;
    forced_.clear();
    conflicts_.clear();
    for (std::uint32_t j = 0; j < n_; ++j) {
      for (std::size_t k = band_.first[j]; k <= band_.last[j]; ++k) {
        if (allowed(j, k)) ++z_[j];
      }
      refresh(j);
    }
  }

  void refresh(std::uint32_t j) {
    if (complete(j)) {
      forced_.erase(j);
      conflicts_.erase(j);
    } else if (z_[j] < need(j)) {
      forced_.erase(j);
      conflicts_.insert(j);
    } else if (z_[j] == need(j)) {
      conflicts_.erase(j);
      forced_.insert(j);
    } else {
      forced_.erase(j);
      conflicts_.erase(j);
    }
  }

  // Row c just became complete: it stops being a free slot for its
  // non-adjacent, incomplete in-band partners.
  void on_complete(std::uint32_t c) {
    mark(c);
    for (std::size_t k = band_.first[c]; k <= band_.last[c]; ++k) {
      const auto kk = static_cast<std::uint32_t>(k);
      if (!allowed(c, k) || marked(kk) || complete(k)) continue;
      --z_[k];
      refresh(kk);
    }
  }

  void link(std::uint32_t a, std::uint32_t b) {
    adj_[a].push_back(b);
    adj_[b].push_back(a);
    ++e_[a];
    ++e_[b];
  }

  void unlink(std::uint32_t a, std::uint32_t b) {
    auto drop = [](std::vector<std::uint32_t>& v, std::uint32_t x) {
      v.erase(std::find(v.begin(), v.end(), x));
    };
    drop(adj_[a], b);
    drop(adj_[b], a);
    --e_[a];
    --e_[b];
  }

  // Edge between two rows that were free slots of each other.
  void add_free_edge(std::uint32_t a, std::uint32_t b) {
    link(a, b);
    --z_[a];
    --z_[b];
    const bool ca = complete(a), cb = complete(b);
    if (ca) on_complete(a);
    if (cb) on_complete(b);
    refresh(a);
    refresh(b);
  }

  std::vector<std::uint32_t> free_partners(std::uint32_t r, bool want_complete) {
    mark(r);
    std::vector<std::uint32_t> out;
    for (std::size_t k = band_.first[r]; k <= band_.last[r]; ++k) {
      const auto kk = static_cast<std::uint32_t>(k);
      if (allowed(r, k) && !marked(kk) && complete(k) == want_complete) {
        out.push_back(kk);
      }
    }
    return out;
  }

  void fill_row(std::uint32_t r, Rng& rng, bool allow_excess) {
    const std::size_t want = need(r);
    auto pool = free_partners(r, false);
    const std::size_t take = std::min(want, pool.size());
    choose_prefix(pool, take, rng);
    for (std::size_t i = 0; i < take; ++i) add_free_edge(r, pool[i]);
    if (!allow_excess || take == want) return;
    auto extra = free_partners(r, true);
    const std::size_t more = std::min(want - take, extra.size());
    choose_prefix(extra, more, rng);
    for (std::size_t i = 0; i < more; ++i) {
      link(r, extra[i]);  // extra[i] exceeds rho; no slot bookkeeping
    }
    if (complete(r)) on_complete(r);
    refresh(r);
  }

  // Row r is in conflict. Pick a completed row c that blocks one of r's
  // slots and move one of its entries, chosen at random, onto r. If the
  // entry came from a completed row x, x reopens and the deficit moves on.
  bool reshuffle_blocker(std::uint32_t r, Rng& rng) {
    mark(r);
    std::vector<std::uint32_t> blockers;
    for (std::size_t k = band_.first[r]; k <= band_.last[r]; ++k) {
      const auto c = static_cast<std::uint32_t>(k);
      if (allowed(r, c) && !marked(c) && complete(c)) blockers.push_back(c);
    }
    if (blockers.empty()) return false;
    const std::uint32_t c = blockers[rng.below(blockers.size())];
    const std::uint32_t x = adj_[c][rng.below(adj_[c].size())];
    const bool x_was_complete = complete(x);

    // c keeps its degree throughout, so it never counts as a free slot.
    unlink(c, x);
    ++e_[c];
    if (x_was_complete) reopen(x);
    link(c, r);
    --e_[c];
    if (complete(r)) on_complete(r);
    refresh(r);
    refresh(x);
    return true;
  }

  // Row x dropped below rho: it becomes a free slot again for its
  // incomplete, non-adjacent in-band partners.
  void reopen(std::uint32_t x) {
    mark(x);
    z_[x] = 0;
    for (std::size_t k = band_.first[x]; k <= band_.last[x]; ++k) {
      const auto kk = static_cast<std::uint32_t>(k);
      if (!allowed(x, k) || marked(kk) || complete(k)) continue;
      ++z_[x];
      ++z_[k];
      refresh(kk);
    }
    cursor_ = std::min<std::size_t>(cursor_, x);
  }

  std::size_t rho_;
  const BandwidthProfile& band_;
  std::size_t n_;
  std::vector<std::vector<std::uint32_t>> adj_;
  std::vector<std::size_t> e_;
  std::vector<std::size_t> z_;
  std::vector<std::uint64_t> stamp_;
  std::uint64_t token_ = 0;
  std::size_t cursor_ = 0;
  std::set<std::uint32_t> forced_;
  std::set<std::uint32_t> conflicts_;
};

void check_band(std::size_t dim, const BandwidthProfile& band) {
  if (band.dim() != dim) throw DomainError("band profile dimension differs from N");
  for (std::size_t j = 0; j < dim; ++j) {
    if (band.first[j] > j || band.last[j] < j || band.last[j] >= dim) {
      throw DomainError("band window of node " + std::to_string(j) + " is malformed");
    }
  }
}

bool pairing_attempt(std::size_t dim, std::size_t rho, Rng& rng,
                     std::vector<Edge>& edges) {
  std::vector<std::uint32_t> points(dim * rho);
  for (std::size_t i = 0; i < points.size(); ++i) {
    points[i] = static_cast<std::uint32_t>(i / rho);
  }
  for (std::size_t i = points.size(); i > 1; --i) {
    std::swap(points[i - 1], points[rng.below(i)]);
  }
  std::unordered_set<std::uint64_t> seen;
  seen.reserve(points.size());
  edges.clear();
  for (std::size_t i = 0; i < points.size(); i += 2) {
    const auto a = points[i], b = points[i + 1];
    if (a == b || !seen.insert(edge_key(a, b)).second) return false;
    edges.emplace_back(std::min(a, b), std::max(a, b));
  }
  return true;
}

// Greedy stub matching: repeatedly pair random stubs, keeping pairs that are
// not loops or repeats, and retry with the leftovers while some valid pair
// remains.
bool greedy_attempt(std::size_t dim, std::size_t rho, Rng& rng,
                    std::vector<Edge>& edges) {
  std::vector<std::uint32_t> stubs(dim * rho);
  for (std::size_t i = 0; i < stubs.size(); ++i) {
    stubs[i] = static_cast<std::uint32_t>(i / rho);
  }
  std::unordered_set<std::uint64_t> seen;
  seen.reserve(stubs.size());
  edges.clear();
  while (!stubs.empty()) {
    for (std::size_t i = stubs.size(); i > 1; --i) {
      std::swap(stubs[i - 1], stubs[rng.below(i)]);
    }
    std::vector<std::uint32_t> left;
    for (std::size_t i = 0; i < stubs.size(); i += 2) {
      const auto a = stubs[i], b = stubs[i + 1];
      if (a != b && seen.insert(edge_key(a, b)).second) {
        edges.emplace_back(std::min(a, b), std::max(a, b));
      } else {
        left.push_back(a);
        left.push_back(b);
      }
    }
    if (left.size() == stubs.size()) {
      // No progress this round: check that any valid pair exists.
      std::vector<std::uint32_t> nodes(left);
      std::sort(nodes.begin(), nodes.end());
      nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
      bool any = false;
      for (std::size_t i = 0; i < nodes.size() && !any; ++i) {
        for (std::size_t j = i + 1; j < nodes.size() && !any; ++j) {
          any = !seen.count(edge_key(nodes[i], nodes[j]));
        }
      }
      if (!any) return false;
    }
    stubs = std::move(left);
  }
  return true;
}

void switch_chain(std::vector<Edge>& edges, std::size_t steps, Rng& rng) {
  std::unordered_set<std::uint64_t> present;
  present.reserve(edges.size() * 2);
  for (auto [a, b] : edges) present.insert(edge_key(a, b));
  const std::size_t m = edges.size();
  if (m < 2) return;
  for (std::size_t s = 0; s < steps; ++s) {
    const std::size_t i = rng.below(m), j = rng.below(m);
    if (i == j) continue;
    auto [a, b] = edges[i];
    auto [c, d] = edges[j];
    if (rng.below(2)) std::swap(c, d);
    // (a,b),(c,d) -> (a,d),(c,b)
    if (a == d || c == b) continue;
    const auto k1 = edge_key(a, d), k2 = edge_key(c, b);
    if (present.count(k1) || present.count(k2)) continue;
    present.erase(edge_key(a, b));
    present.erase(edge_key(c, d));
    present.insert(k1);
    present.insert(k2);
    edges[i] = {std::min(a, d), std::max(a, d)};
    edges[j] = {std::min(c, b), std::max(c, b)};
  }
}

double pooled_stddev(const std::vector<double>& values) {
  return values.size() < 2 ? 0.0 : sample_stddev(values);
}

}  // namespace

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::kExh: return "exh";
    case Variant::kExa: return "exa";
    case Variant::kBrf: return "brf";
    case Variant::kBvf: return "bvf";
    case Variant::kBrc: return "brc";
    case Variant::kReg: return "reg";
  }
  return "?";
}

Variant parse_variant(std::string_view name) {
  std::string lower(name);
  for (auto& ch : lower) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  for (auto v : kAllVariants) {
    if (to_string(v) == lower) return v;
  }
  throw DomainError("unknown variant '" + std::string(name) + "'");
}

double WeightModel::sigma_diag(int sites) const {
  return diag_slope * sites + diag_intercept;
}

AdjacencyGraph build_banded_regular(std::size_t dim, std::size_t rho,
                                    const BandwidthProfile& band,
                                    std::uint64_t seed, const RetryCaps& caps,
                                    ConstructionStats* stats) {
  check_band(dim, band);
  BandedBuilder builder(rho, band);
  const std::size_t window = builder.min_window();
  if (rho > window) {
    throw InfeasibleError("degree " + std::to_string(rho) +
                          " exceeds the smallest band window (" +
                          std::to_string(window) + " partners)");
  }
  if ((dim * rho) % 2 != 0) throw InfeasibleError("N * rho must be even");
  ConstructionStats local;
  for (int attempt = 0; attempt < caps.restart_cap; ++attempt) {
    ++local.attempts;
    Rng rng(seed, Stream::kGraph, static_cast<std::uint32_t>(attempt));
    if (builder.attempt_regular(rng, caps.shuffle_cap, local.shuffles)) {
      if (stats) *stats = local;
      return builder.graph();
    }
  }
  if (stats) *stats = local;
  throw InfeasibleError("banded regular construction failed after " +
                        std::to_string(caps.restart_cap) + " attempts");
}

AdjacencyGraph build_banded_variable(std::size_t dim, std::size_t rho_avg,
                                     const BandwidthProfile& band,
                                     std::uint64_t seed) {
  check_band(dim, band);
  BandedBuilder builder(rho_avg, band);
  const std::size_t target = dim * rho_avg / 2;
  Rng rng(seed, Stream::kGraph);
  builder.attempt_variable(rng);
  auto g = builder.graph();
  auto edges = g.edges();
  if (edges.size() < target) {
    throw InfeasibleError("band too narrow for average degree " +
                          std::to_string(rho_avg));
  }
  // Drop uniformly random excess edges.
  for (std::size_t i = edges.size(); i > 1; --i) {
    std::swap(edges[i - 1], edges[rng.below(i)]);
  }
  edges.resize(target);
  return AdjacencyGraph::from_edges(dim, edges);
}

AdjacencyGraph build_banded_constant(std::size_t dim, std::size_t rho,
                                     std::size_t bmax, std::uint64_t seed,
                                     const RetryCaps& caps,
                                     ConstructionStats* stats) {
  // The end nodes see only bmax partners.
  if (rho > bmax && rho < dim) {
    throw InfeasibleError("constant band half-width " + std::to_string(bmax) +
                          " cannot host degree " + std::to_string(rho));
  }
  return build_banded_regular(dim, rho, constant_bandwidth(dim, bmax), seed,
                              caps, stats);
}

AdjacencyGraph build_regular(std::size_t dim, std::size_t rho, std::uint64_t seed,
                             const RegularOptions& options) {
  if (rho >= dim) throw DomainError("regular degree must be below N");
  if ((dim * rho) % 2 != 0) throw DomainError("N * rho must be even");
  std::vector<Edge> edges;
  if (rho == 0) return AdjacencyGraph(dim);
  if (rho <= options.pairing_max_degree) {
    for (int attempt = 0; attempt < options.pairing_cap; ++attempt) {
      Rng rng(seed, Stream::kGraph, static_cast<std::uint32_t>(attempt));
      if (pairing_attempt(dim, rho, rng, edges)) {
        return AdjacencyGraph::from_edges(dim, edges);
      }
    }
    throw InfeasibleError("pairing model exceeded its rejection cap");
  }
  for (int attempt = 0; attempt < options.pairing_cap; ++attempt) {
    Rng rng(seed, Stream::kGraph, static_cast<std::uint32_t>(attempt));
    if (greedy_attempt(dim, rho, rng, edges)) {
      switch_chain(edges, options.switches_per_edge * edges.size(), rng);
      return AdjacencyGraph::from_edges(dim, edges);
    }
  }
  throw InfeasibleError("regular graph construction exceeded its cap");
}

SparseHermitian assign_weights(const AdjacencyGraph& g, const WeightModel& model,
                               int sites, std::uint64_t seed) {
  const double sd = model.sigma_diag(sites);
  if (sd < 0.0 || model.sigma_off < 0.0) {
    throw DomainError("weight model has a negative standard deviation");
  }
  Rng rng(seed, Stream::kWeights);
  auto draw_normal = [&](double s) { return s > 0.0 ? rng.normal(0.0, s) : 0.0; };
  std::vector<MatrixEntry> entries;
  entries.reserve(g.dim() + g.edge_count());
  for (std::uint32_t j = 0; j < g.dim(); ++j) {
    entries.push_back({j, j, Complex(draw_normal(sd), 0.0)});
    for (auto k : g.neighbors(j)) {
      if (k <= j) continue;
      const double re = draw_normal(model.sigma_off);
      const double im = model.complex_off ? draw_normal(model.sigma_off) : 0.0;
      entries.push_back({j, k, Complex(re, im)});
    }
  }
  return SparseHermitian::from_upper(g.dim(), std::move(entries));
}

BandwidthProfile ensemble_band(const LocalitySpec& spec,
                               const DiagonalObservable& obs) {
  return functional_bandwidth(obs, flip_radius(spec, obs));
}

AdjacencyGraph variant_graph(const EnsembleSpec& spec,
                             const DiagonalObservable& obs,
                             ConstructionStats* stats) {
  const auto& loc = spec.locality;
  loc.validate();
  const std::size_t dim = loc.dimension();
  const auto rho = spec.degree.value_or(static_cast<std::size_t>(degree_formula(loc)));
  if (spec.degree && (spec.variant == Variant::kExh || spec.variant == Variant::kExa)) {
    throw DomainError("the degree of exh and exa is fixed by locality");
  }
  switch (spec.variant) {
    case Variant::kExh:
    case Variant::kExa:
      return exact_adjacency(loc, obs);
    case Variant::kBrf:
      return build_banded_regular(dim, rho, ensemble_band(loc, obs), spec.seed, {},
                                  stats);
    case Variant::kBvf:
      return build_banded_variable(dim, rho, ensemble_band(loc, obs), spec.seed);
    case Variant::kBrc:
      return build_banded_constant(dim, rho, ensemble_band(loc, obs).max_half_width(),
                                   spec.seed, {}, stats);
    case Variant::kReg:
      return build_regular(dim, rho, spec.seed);
  }
  throw DomainError("unknown variant");
}

EnsembleSample draw(const EnsembleSpec& spec, const WeightModel& weights,
                    const ScalingFits* fits) {
  const auto& loc = spec.locality;
  loc.validate();
  const std::size_t dim = loc.dimension();
  auto obs = build_observable(loc.sites, spec.observable_mode, spec.seed);
  EnsembleSample out{SparseHermitian{}, obs, 1.0, false, {}};

  SparseHermitian raw;
  if (spec.variant == Variant::kExh && spec.degree) {
    throw DomainError("the degree of exh and exa is fixed by locality");
  }
  if (spec.variant == Variant::kExh) {
    raw = build_hamiltonian(loc, sample_couplings(loc, spec.seed), obs);
  } else {
    const auto g = variant_graph(spec, obs, &out.construction);
    raw = assign_weights(g, weights, loc.sites, spec.seed);
  }

  if (dim <= kExactNormMaxDim) {
    out.raw_norm = spectral_norm(raw);
  } else {
    if (!fits || fits->empty()) {
      throw DomainError("normalising N = " + std::to_string(dim) +
                        " needs scaling fits");
    }
    out.raw_norm = fits->norm_at(loc.sites);
    out.norm_extrapolated = true;
  }
  if (!(out.raw_norm > 0.0)) throw DomainError("sampled matrix has zero norm");
  out.hamiltonian = raw.scaled(1.0 / out.raw_norm,
                               out.norm_extrapolated ? std::nullopt
                                                     : std::optional<double>(1.0));
  return out;
}

WeightStatistics measure_weight_statistics(int bodies, int diameter,
                                           std::span<const int> sizes,
                                           std::size_t samples_per_size,
                                           std::uint64_t seed) {
  WeightStatistics stats;
  stats.bodies = bodies;
  stats.diameter = diameter;
  stats.samples_per_size = samples_per_size;
  for (const int L : sizes) {
    const LocalitySpec loc{L, bodies, diameter};
    loc.validate();
    std::vector<double> diag, off;
    for (std::size_t s = 0; s < samples_per_size; ++s) {
      const auto sample_seed = derive_seed(seed, s);
      const auto obs = build_observable(L, ObservableMode::kRandomised, sample_seed);
      const auto h = build_hamiltonian(loc, sample_couplings(loc, sample_seed), obs);
      for (const auto& e : h.entries()) {
        if (e.row == e.col) {
          diag.push_back(e.value.real());
        } else {
          off.push_back(e.value.real());
          off.push_back(e.value.imag());
        }
      }
    }
    stats.sizes.push_back(L);
    stats.sigma_diag.push_back(pooled_stddev(diag));
    stats.sigma_off.push_back(pooled_stddev(off));
  }
  return stats;
}

WeightModel fit_weight_model(const WeightStatistics& stats, LinearFit* diag_fit) {
  if (stats.sizes.size() < 2) throw DomainError("weight model needs two sizes or more");
  std::vector<double> x(stats.sizes.begin(), stats.sizes.end());
  const auto fit = fit_linear(x, stats.sigma_diag);
  WeightModel model;
  model.diag_slope = fit.slope;
  model.diag_intercept = fit.intercept;
  model.sigma_off = mean_stderr(stats.sigma_off).mean;
  model.complex_off = true;
  if (diag_fit) *diag_fit = fit;
  return model;
}

ScalingFits fit_scalings(const LocalitySpec& locality, std::span<const int> sizes,
                         std::size_t samples_per_size, std::uint64_t seed,
                         Variant variant, const WeightModel* weights,
                         ObservableMode mode) {
  std::vector<int> distinct(sizes.begin(), sizes.end());
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (distinct.size() < 4) throw DomainError("scaling fits need at least four sizes");
  if (variant != Variant::kExh && !weights) {
    throw DomainError("graph variants need a weight model for scaling fits");
  }
  if (samples_per_size == 0) throw DomainError("scaling fits need samples");
  const WeightModel fallback;
  ScalingFits fits;
  fits.variant = variant;
  for (const int L : distinct) {
    const LocalitySpec loc{L, locality.bodies, locality.diameter};
    loc.validate();
    if (loc.dimension() > kExactNormMaxDim) {
      throw DomainError("scaling fits need exactly normalisable sizes (L <= 12)");
    }
    std::vector<double> norms, deltas;
    for (std::size_t s = 0; s < samples_per_size; ++s) {
      const EnsembleSpec es{variant, loc, mode, derive_seed(seed, s)};
      const auto smp = draw(es, weights ? *weights : fallback);
      norms.push_back(smp.raw_norm);
      deltas.push_back(delta_o(smp.hamiltonian, smp.observable));
    }
    fits.sizes.push_back(L);
    fits.mean_norm.push_back(mean_stderr(norms).mean);
    fits.mean_delta_o.push_back(mean_stderr(deltas).mean);
  }
  std::vector<double> x(fits.sizes.begin(), fits.sizes.end());
  fits.norm_fit = fit_linear(x, fits.mean_norm);
  fits.delta_o_fit = fit_power_exp(x, fits.mean_delta_o);
  return fits;
}

std::vector<int> default_calibration_sizes(int bodies, int diameter) {
  const int lo = std::max({4, diameter + 1, bodies});
  const int hi = std::max(10, lo + 3);
  std::vector<int> sizes;
  for (int L = lo; L <= hi; ++L) sizes.push_back(L);
  return sizes;
}

Calibration calibrate(int bodies, int diameter, Variant variant,
                      const CalibrationOptions& options) {
  const auto sizes = options.sizes.empty()
                         ? default_calibration_sizes(bodies, diameter)
                         : options.sizes;
  Calibration c;
  c.bodies = bodies;
  c.diameter = diameter;
  c.variant = variant;
  c.seed = options.seed;
  c.statistics = measure_weight_statistics(bodies, diameter, sizes,
                                           options.samples_per_size,
                                           derive_seed(options.seed, 0x77));
  c.weights = fit_weight_model(c.statistics, &c.diag_fit);
  c.fits = fit_scalings(LocalitySpec{sizes.back(), bodies, diameter}, sizes,
                        options.samples_per_size, derive_seed(options.seed, 0x5c),
                        variant, &c.weights);
  return c;
}

namespace {

nlohmann::json linear_json(const LinearFit& f) {
  return {{"slope", f.slope},
          {"intercept", f.intercept},
          {"slope_stderr", f.slope_stderr},
          {"intercept_stderr", f.intercept_stderr},
          {"r_squared", f.r_squared},
          {"x_min", f.x_min},
          {"x_max", f.x_max},
          {"residuals", f.residuals}};
}

LinearFit linear_from(const nlohmann::json& j) {
  LinearFit f;
  f.slope = j.at("slope");
  f.intercept = j.at("intercept");
  f.slope_stderr = j.at("slope_stderr");
  f.intercept_stderr = j.at("intercept_stderr");
  f.r_squared = j.at("r_squared");
  f.x_min = j.at("x_min");
  f.x_max = j.at("x_max");
  f.residuals = j.at("residuals").get<std::vector<double>>();
  return f;
}

}  // namespace

std::string calibration_to_json(const Calibration& c) {
  nlohmann::json j;
  j["version"] = std::string(code_version());
  j["bodies"] = c.bodies;
  j["diameter"] = c.diameter;
  j["variant"] = std::string(to_string(c.variant));
  j["seed"] = c.seed;
  j["statistics"] = {{"sizes", c.statistics.sizes},
                     {"sigma_diag", c.statistics.sigma_diag},
                     {"sigma_off", c.statistics.sigma_off},
                     {"samples_per_size", c.statistics.samples_per_size}};
  j["weights"] = {{"diag_slope", c.weights.diag_slope},
                  {"diag_intercept", c.weights.diag_intercept},
                  {"sigma_off", c.weights.sigma_off},
                  {"complex_off", c.weights.complex_off}};
  j["diag_fit"] = linear_json(c.diag_fit);
  j["fits"] = {{"variant", std::string(to_string(c.fits.variant))},
               {"sizes", c.fits.sizes},
               {"mean_norm", c.fits.mean_norm},
               {"mean_delta_o", c.fits.mean_delta_o},
               {"norm_fit", linear_json(c.fits.norm_fit)},
               {"delta_o_fit",
                {{"a", c.fits.delta_o_fit.a},
                 {"b", c.fits.delta_o_fit.b},
                 {"x_min", c.fits.delta_o_fit.x_min},
                 {"x_max", c.fits.delta_o_fit.x_max},
                 {"residuals", c.fits.delta_o_fit.residuals}}}};
  return j.dump(2);
}

Calibration calibration_from_json(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text);
    Calibration c;
    c.bodies = j.at("bodies");
    c.diameter = j.at("diameter");
    c.variant = parse_variant(j.at("variant").get<std::string>());
    c.seed = j.at("seed");
    const auto& s = j.at("statistics");
    c.statistics.bodies = c.bodies;
    c.statistics.diameter = c.diameter;
    c.statistics.sizes = s.at("sizes").get<std::vector<int>>();
    c.statistics.sigma_diag = s.at("sigma_diag").get<std::vector<double>>();
    c.statistics.sigma_off = s.at("sigma_off").get<std::vector<double>>();
    c.statistics.samples_per_size = s.at("samples_per_size");
    const auto& w = j.at("weights");
    c.weights.diag_slope = w.at("diag_slope");
    c.weights.diag_intercept = w.at("diag_intercept");
    c.weights.sigma_off = w.at("sigma_off");
    c.weights.complex_off = w.at("complex_off");
    c.diag_fit = linear_from(j.at("diag_fit"));
    const auto& f = j.at("fits");
    c.fits.variant = parse_variant(f.at("variant").get<std::string>());
    c.fits.sizes = f.at("sizes").get<std::vector<int>>();
    c.fits.mean_norm = f.at("mean_norm").get<std::vector<double>>();
    c.fits.mean_delta_o = f.at("mean_delta_o").get<std::vector<double>>();
    c.fits.norm_fit = linear_from(f.at("norm_fit"));
    const auto& d = f.at("delta_o_fit");
    c.fits.delta_o_fit.a = d.at("a");
    c.fits.delta_o_fit.b = d.at("b");
    c.fits.delta_o_fit.x_min = d.at("x_min");
    c.fits.delta_o_fit.x_max = d.at("x_max");
    c.fits.delta_o_fit.residuals = d.at("residuals").get<std::vector<double>>();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed fit cache: ") + e.what());
  }
}

Calibration cached_calibration(const std::filesystem::path& dir, int bodies,
                               int diameter, Variant variant,
                               const CalibrationOptions& options) {
  std::filesystem::create_directories(dir);
  const std::string stem = "fits_n" + std::to_string(bodies) + "_d" +
                           std::to_string(diameter) + "_" +
                           std::string(to_string(variant));
  const auto path = dir / (stem + ".json");
  FileLock lock(dir / (stem + ".lock"));
  const auto sizes = options.sizes.empty()
                         ? default_calibration_sizes(bodies, diameter)
                         : options.sizes;
  if (std::filesystem::exists(path)) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    try {
      auto c = calibration_from_json(ss.str());
      if (c.seed == options.seed && c.statistics.sizes == sizes &&
          c.statistics.samples_per_size == options.samples_per_size) {
        return c;
      }
    } catch (const FormatError&) {
      // stale or damaged cache: recompute below
    }
  }
  auto c = calibrate(bodies, diameter, variant, options);
  const auto tmp = dir / (stem + ".json.tmp");
  {
    std::ofstream out(tmp);
    out << calibration_to_json(c) << '\n';
  }
  std::filesystem::rename(tmp, path);
  return c;
}

}  // namespace loceq

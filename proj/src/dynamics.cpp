#include "loceq/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "loceq/errors.hpp"
#include "loceq/linalg.hpp"

namespace loceq {

State basis_state(std::size_t dim, std::size_t node) {
  if (node >= dim) throw DomainError("basis node out of range");
  State psi(dim, Complex{});
  psi[node] = 1.0;
  return psi;
}

double state_norm(std::span<const Complex> psi) {
  double s = 0.0;
  for (const auto& c : psi) s += std::norm(c);
  return std::sqrt(s);
}

Propagator::Propagator(const SparseHermitian& h, double tol, int max_order)
    : csr_(to_csr(h)), max_order_(max_order) {
  bound_ = csr_.one_norm();
  if (h.norm_hint()) bound_ = std::min(bound_, *h.norm_hint());
  // Leave room for accumulation over many substeps.
  term_tol_ = std::max(tol * 1e-3, 1e-16);
  term_.resize(h.dim());
  next_.resize(h.dim());
}

void Propagator::advance(State& psi, double dt) const {
  if (dt < 0.0) throw DomainError("negative time step");
  if (dt == 0.0 || bound_ == 0.0) return;
  const auto substeps = static_cast<std::size_t>(std::ceil(bound_ * dt));
  const double tau = dt / static_cast<double>(substeps);
  const std::size_t n = psi.size();
  for (std::size_t s = 0; s < substeps; ++s) {
    term_ = psi;
    int order = 1;
    for (;; ++order) {
      if (order > max_order_) {
        throw ConvergenceError("Taylor series did not converge within " +
                               std::to_string(max_order_) + " terms");
      }
      csr_.multiply(term_, next_);
      const Complex factor(0.0, -tau / order);
      double norm2 = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        term_[i] = factor * next_[i];
        psi[i] += term_[i];
        norm2 += std::norm(term_[i]);
      }
      if (std::sqrt(norm2) <= term_tol_) break;
    }
  }
}

std::vector<State> propagate(const SparseHermitian& h, std::span<const Complex> psi0,
                             std::span<const double> times, double tol) {
  if (psi0.size() != h.dim()) throw DomainError("state dimension mismatch");
  if (std::abs(state_norm(psi0) - 1.0) > 1e-8) {
    throw DomainError("initial state is not normalised");
  }
  Propagator prop(h, tol);
  std::vector<State> out;
  out.reserve(times.size());
  State psi(psi0.begin(), psi0.end());
  double now = 0.0;
  for (const double t : times) {
    if (t < now) throw DomainError("times must be nondecreasing and nonnegative");
    prop.advance(psi, t - now);
    now = t;
    out.push_back(psi);
  }
  return out;
}

namespace {

DiagonalAverages moments(const State& psi, const DiagonalObservable& obs) {
  const auto& o = obs.eigenvalues();
  DiagonalAverages m;
  for (std::size_t i = 0; i < psi.size(); ++i) {
    const double p = std::norm(psi[i]);
    m.o += p * o[i];
    m.o2 += p * o[i] * o[i];
  }
  return m;
}

}  // namespace

EvolutionSeries evolve(const SparseHermitian& h, const DiagonalObservable& obs,
                       std::size_t initial_node, std::span<const double> times,
                       double tol) {
  if (h.dim() != obs.dimension()) {
    throw DomainError("Hamiltonian and observable dimensions differ");
  }
  EvolutionSeries series;
  series.initial_node = initial_node;
  Propagator prop(h, tol);
  State psi = basis_state(h.dim(), initial_node);
  double now = 0.0;
  for (const double t : times) {
    if (t < now) throw DomainError("times must be nondecreasing and nonnegative");
    prop.advance(psi, t - now);
    now = t;
    const auto m = moments(psi, obs);
    series.times.push_back(t);
    series.exp_o.push_back(m.o);
    series.exp_o2.push_back(m.o2);
    series.norm_drift.push_back(std::abs(state_norm(psi) - 1.0));
  }
  return series;
}

DiagonalAverages diagonal_average(const SparseHermitian& h,
                                  const DiagonalObservable& obs,
                                  std::span<const Complex> psi0,
                                  double degeneracy_tol) {
  const std::size_t n = h.dim();
  if (n != obs.dimension() || psi0.size() != n) {
    throw DomainError("dimension mismatch in diagonal average");
  }
  if (n > kDiagonalEnsembleMaxDim) {
    throw CapExceeded("diagonal ensemble needs N <= " +
                      std::to_string(kDiagonalEnsembleMaxDim));
  }
  const auto sys = hermitian_eigensystem(h.to_dense());
  Eigen::VectorXcd psi(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) psi(static_cast<Eigen::Index>(i)) = psi0[i];
  const Eigen::VectorXcd c = sys.vectors.adjoint() * psi;
  const double scale = std::max(1.0, sys.values.cwiseAbs().maxCoeff());

  const auto& o = obs.eigenvalues();
  DiagonalAverages out;
  Eigen::VectorXcd phi(static_cast<Eigen::Index>(n));
  const auto count = static_cast<Eigen::Index>(n);
  for (Eigen::Index b = 0; b < count;) {
    Eigen::Index e = b + 1;
    while (e < count && sys.values(e) - sys.values(e - 1) <= degeneracy_tol * scale) ++e;
    // Projection of psi on the eigenspace spanned by columns b..e-1.
    phi = sys.vectors.middleCols(b, e - b) * c.segment(b, e - b);
    for (Eigen::Index i = 0; i < count; ++i) {
      const double p = std::norm(phi(i));
      const double oi = o[static_cast<std::size_t>(i)];
      out.o += p * oi;
      out.o2 += p * oi * oi;
    }
    b = e;
  }
  return out;
}

DiagonalAverages long_time_average(const EvolutionSeries& series, double t_min) {
  const auto& t = series.times;
  std::size_t start = 0;
  while (start < t.size() && t[start] < t_min) ++start;
  if (t.size() - start < 2) {
    throw DomainError("long-time average needs two grid points past t_min");
  }
  DiagonalAverages acc;
  double span = 0.0;
  for (std::size_t i = start + 1; i < t.size(); ++i) {
    const double dt = t[i] - t[i - 1];
    acc.o += 0.5 * dt * (series.exp_o[i] + series.exp_o[i - 1]);
    acc.o2 += 0.5 * dt * (series.exp_o2[i] + series.exp_o2[i - 1]);
    span += dt;
  }
  if (!(span > 0.0)) {
    // All samples at one instant: plain mean.
    acc = {};
    for (std::size_t i = start; i < t.size(); ++i) {
      acc.o += series.exp_o[i];
      acc.o2 += series.exp_o2[i];
    }
    span = static_cast<double>(t.size() - start);
  }
  acc.o /= span;
  acc.o2 /= span;
  return acc;
}

std::vector<double> default_time_grid(double horizon, double step, double first) {
  if (!(horizon > 0.0) || !(step > 0.0) || !(first > 0.0)) {
    throw DomainError("time grid parameters must be positive");
  }
  std::vector<double> grid{0.0};
  for (double t = first; t < step && t < horizon; t *= 2.0) grid.push_back(t);
  const auto steps = static_cast<std::size_t>(std::floor(horizon / step + 1e-9));
  for (std::size_t i = 1; i <= steps; ++i) grid.push_back(step * static_cast<double>(i));
  if (grid.back() < horizon) grid.push_back(horizon);
  return grid;
}

EquilibrationResult equilibration_time(const SparseHermitian& h,
                                       const DiagonalObservable& obs,
                                       std::size_t initial_node,
                                       const EquilibrationOptions& options) {
  if (!(options.margin > 0.0 && options.margin < 1.0)) {
    throw DomainError("margin must lie in (0, 1)");
  }
  if (h.dim() != obs.dimension()) {
    throw DomainError("Hamiltonian and observable dimensions differ");
  }
  const double horizon =
      options.horizon > 0.0 ? options.horizon : default_horizon(obs.sites());
  const auto grid =
      options.grid.empty() ? default_time_grid(horizon) : options.grid;
  if (grid.empty() || grid.front() != 0.0) {
    throw DomainError("time grid must start at 0");
  }

  EquilibrationResult result;
  result.margin = options.margin;
  result.horizon = grid.back();

  const State psi0 = basis_state(h.dim(), initial_node);
  DiagonalAverages diag;
  if (h.dim() <= kDiagonalEnsembleMaxDim) {
    diag = diagonal_average(h, obs, psi0);
  } else {
    const auto series = evolve(h, obs, initial_node, grid, options.propagator_tol);
    diag = long_time_average(series, 0.5 * grid.back());
  }
  result.diag_o = diag.o;
  result.diag_o2 = diag.o2;

  const auto m0 = moments(psi0, obs);
  const double tol_o = std::max(options.margin * std::abs(m0.o), options.zero_floor);
  const double tol_o2 = std::max(options.margin * std::abs(m0.o2), options.zero_floor);
  auto settled = [&](const State& psi) {
    const auto m = moments(psi, obs);
    return std::abs(m.o - diag.o) <= tol_o && std::abs(m.o2 - diag.o2) <= tol_o2;
  };

  if (settled(psi0)) {
    result.t_eq = 0.0;
    return result;
  }
  Propagator prop(h, options.propagator_tol);
  State psi = psi0;
  double now = 0.0;
  for (std::size_t i = 1; i < grid.size(); ++i) {
    State before = psi;
    prop.advance(psi, grid[i] - now);
    const double prev = now;
    now = grid[i];
    if (!settled(psi)) continue;
    // Bisect on (lo, hi]: not settled at lo, settled at hi.
    double lo = prev, hi = now;
    State at_lo = std::move(before);
    while (hi - lo > options.time_tol) {
      const double mid = 0.5 * (lo + hi);
      State trial = at_lo;
      prop.advance(trial, mid - lo);
      if (settled(trial)) {
        hi = mid;
      } else {
        lo = mid;
        at_lo = std::move(trial);
      }
    }
    result.t_eq = hi;
    return result;
  }
  return result;
}

double influence_measure(const SparseHermitian& h, std::size_t j, std::size_t k,
                         double t, double tol) {
  if (j >= h.dim() || k >= h.dim()) throw DomainError("node out of range");
  // |exp(iH|t|)_jk| = |exp(-iH|t|)_kj|
  if (t < 0.0) std::swap(j, k);
  Propagator prop(h, tol);
  State psi = basis_state(h.dim(), k);
  prop.advance(psi, std::abs(t));
  return std::abs(psi[j]);
}

std::vector<ChainTerm> coupling_chain_terms(const SparseHermitian& h, std::size_t j,
                                            std::size_t k, int q_max, double t) {
  if (j >= h.dim() || k >= h.dim()) throw DomainError("node out of range");
  if (q_max < 0) throw DomainError("q_max must be nonnegative");
  const auto csr = to_csr(h);
  State v = basis_state(h.dim(), k), w(h.dim());
  std::vector<ChainTerm> terms;
  double max_weight = 0.0, max_element = 0.0;
  for (int q = 0; q <= q_max; ++q) {
    if (q > 0) {
      csr.multiply(v, w);
      v.swap(w);
    }
    ChainTerm term;
    term.q = q;
    const double log_w = (q == 0 ? 0.0 : q * std::log(std::abs(t))) - std::lgamma(q + 1.0);
    term.weight = (t == 0.0 && q > 0) ? 0.0 : std::exp(log_w);
    term.element = v[j];
    max_weight = std::max(max_weight, term.weight);
    max_element = std::max(max_element, std::abs(term.element));
    terms.push_back(term);
  }
  for (auto& term : terms) {
    term.weight_scaled = max_weight > 0.0 ? term.weight / max_weight : 0.0;
    term.element_scaled = max_element > 0.0 ? std::abs(term.element) / max_element : 0.0;
  }
  return terms;
}

std::optional<int> chain_onset(const AdjacencyGraph& g, std::size_t j, std::size_t k,
                               int q_max) {
  if (j >= g.dim() || k >= g.dim()) throw DomainError("node out of range");
  // Reachable set after q steps grows monotonically because every node
  // carries a diagonal entry.
  std::vector<char> reached(g.dim(), 0);
  std::vector<std::uint32_t> frontier{static_cast<std::uint32_t>(k)};
  reached[k] = 1;
  for (int q = 0; q <= q_max; ++q) {
    if (reached[j]) return q;
    std::vector<std::uint32_t> next;
    for (auto u : frontier) {
      for (auto v : g.neighbors(u)) {
        if (!reached[v]) {
          reached[v] = 1;
          next.push_back(v);
        }
      }
    }
    if (next.empty()) return std::nullopt;
    frontier = std::move(next);
  }
  return std::nullopt;
}

}  // namespace loceq

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "loceq/graph_analysis.hpp"
#include "loceq/sparse.hpp"
#include "loceq/spin_model.hpp"

namespace loceq {

using State = std::vector<Complex>;

/// Basis vector of `node` in dimension `dim`.
State basis_state(std::size_t dim, std::size_t node);
double state_norm(std::span<const Complex> psi);

/// Action of exp(-iHt) by a truncated Taylor series on substeps.
///
/// Substeps are no longer than 1 / bound, where bound is the smaller of the
/// matrix one-norm and the stored spectral norm hint; the series on each
/// substep runs until the next term drops below the per-substep tolerance.
class Propagator {
 public:
  explicit Propagator(const SparseHermitian& h, double tol = 1e-10,
                      int max_order = 60);

  /// psi <- exp(-iH dt) psi. Throws ConvergenceError if the series does not
  /// reach the tolerance within max_order terms.
  void advance(State& psi, double dt) const;

  const CsrMatrix& csr() const { return csr_; }
  double bound() const { return bound_; }

 private:
  CsrMatrix csr_;
  double bound_;
  double term_tol_;
  int max_order_;
  mutable State term_, next_;
};

/// exp(-iH t) psi0 for every t in `times` (nondecreasing, >= 0).
std::vector<State> propagate(const SparseHermitian& h, std::span<const Complex> psi0,
                             std::span<const double> times, double tol = 1e-10);

struct EvolutionSeries {
  std::vector<double> times;
  std::vector<double> exp_o;
  std::vector<double> exp_o2;
  std::size_t initial_node = 0;
  /// | ||psi(t)|| - 1 |
  std::vector<double> norm_drift;
};

/// <O>(t) and <O^2>(t) on `times` starting from basis node `initial_node`.
EvolutionSeries evolve(const SparseHermitian& h, const DiagonalObservable& obs,
                       std::size_t initial_node, std::span<const double> times,
                       double tol = 1e-10);

/// Largest dimension handled by full diagonalisation.
inline constexpr std::size_t kDiagonalEnsembleMaxDim = std::size_t{1} << 12;

struct DiagonalAverages {
  double o = 0.0;
  double o2 = 0.0;
};

/// Diagonal-ensemble averages sum_E <psi|P_E O P_E|psi> (and O^2), with P_E
/// the projector on the eigenspace of energy E; eigenvalues closer than
/// `degeneracy_tol` are treated as one eigenspace. Throws CapExceeded above
/// kDiagonalEnsembleMaxDim.
DiagonalAverages diagonal_average(const SparseHermitian& h,
                                  const DiagonalObservable& obs,
                                  std::span<const Complex> psi0,
                                  double degeneracy_tol = 1e-10);

/// Trapezoidal time average of <O> and <O^2> over t >= t_min. Throws
/// DomainError with fewer than two grid points in range.
DiagonalAverages long_time_average(const EvolutionSeries& series, double t_min);

/// Dense early times, then a uniform grid: 0, first, 2 first, 4 first, ...
/// below `step`, then step, 2 step, ... up to and including `horizon`.
std::vector<double> default_time_grid(double horizon, double step = 0.1,
                                      double first = 1e-3);

/// Default horizon 10 L.
inline double default_horizon(int sites) { return 10.0 * sites; }

struct EquilibrationOptions {
  double margin = 0.10;
  double horizon = 0.0;             // <= 0: default_horizon(L)
  std::vector<double> grid;         // empty: default_time_grid(horizon)
  double time_tol = 1e-3;           // bisection resolution
  double zero_floor = 1e-6;         // absolute margin when <O>(0) = 0
  double propagator_tol = 1e-10;
};

struct EquilibrationResult {
  std::optional<double> t_eq;  // empty: not reached within the horizon
  double diag_o = 0.0;
  double diag_o2 = 0.0;
  double margin = 0.10;
  double horizon = 0.0;
  bool reached() const { return t_eq.has_value(); }
};

/// Node of the largest observable eigenvalue (the maximally magnetised
/// configuration), the default initial state.
inline std::size_t default_initial_node(const DiagonalObservable& obs) {
  return obs.dimension() - 1;
}

/// First time at which both |<O>(t) - diag_O| <= margin |<O>(0)| and
/// |<O^2>(t) - diag_O2| <= margin |<O^2>(0)| hold, located on the grid and
/// refined by bisection between the bracketing grid points. Diagonal
/// averages come from diagonal_average up to kDiagonalEnsembleMaxDim and
/// from the long-time average of the second half of the horizon above.
EquilibrationResult equilibration_time(const SparseHermitian& h,
                                       const DiagonalObservable& obs,
                                       std::size_t initial_node,
                                       const EquilibrationOptions& options = {});

/// Lambda_jk(t) = |(exp(-iHt))_jk|.
double influence_measure(const SparseHermitian& h, std::size_t j, std::size_t k,
                         double t, double tol = 1e-10);

struct ChainTerm {
  int q = 0;
  /// |w_q| = |t|^q / q!
  double weight = 0.0;
  /// (H^q)_jk
  Complex element;
  /// weight and |element| divided by their maxima over q = 0..q_max
  double weight_scaled = 0.0;
  double element_scaled = 0.0;
};

/// Terms of the series (exp(-iHt))_jk = sum_q w_q (H^q)_jk for q = 0..q_max.
/// Weights are evaluated in log space.
std::vector<ChainTerm> coupling_chain_terms(const SparseHermitian& h, std::size_t j,
                                            std::size_t k, int q_max, double t);

/// Smallest q <= q_max with (A^q)_jk != 0 for the adjacency A with every
/// diagonal entry present (walks may pause), i.e. the length of the shortest
/// coupling chain. Empty if none.
std::optional<int> chain_onset(const AdjacencyGraph& g, std::size_t j, std::size_t k,
                               int q_max);

}  // namespace loceq

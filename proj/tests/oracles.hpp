#pragma once

// Brute-force reference implementations used by the tests and the
// acceptance gate. None of them call into the code paths they check.

#include <cstdint>
#include <map>
#include <tuple>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "loceq/spin_model.hpp"

namespace oracle {

using Eigen::MatrixXcd;
using Eigen::VectorXcd;

/// H in the spin-z product basis (index bit i = site i up), assembled term
/// by term as explicit Kronecker products of 2x2 Pauli matrices.
MatrixXcd kron_hamiltonian(const loceq::LocalitySpec& spec,
                           const loceq::CouplingSample& couplings);

/// Reorders a product-basis matrix into the node order of `obs`.
MatrixXcd to_node_basis(const MatrixXcd& h, const loceq::DiagonalObservable& obs);

/// exp(-iHt) psi through Eigen's own Hermitian eigensolver.
VectorXcd evolve_dense(const MatrixXcd& h, const VectorXcd& psi, double t);

/// Eigenspace-projected diagonal averages of a diagonal observable.
std::pair<double, double> diagonal_average_dense(const MatrixXcd& h,
                                                 const std::vector<double>& o,
                                                 const VectorXcd& psi,
                                                 double degeneracy_tol);

struct Edge {
  int a = 0;
  int b = 0;
  double capacity = 0.0;
};

/// Minimum s-t cut over all 2^(n-2) vertex bipartitions.
double min_cut_exhaustive(int n, const std::vector<Edge>& edges, int s, int t);

/// Shortest-path length between j and k on the off-diagonal pattern of h,
/// -1 when disconnected.
int bfs_distance(const MatrixXcd& h, int j, int k, double zero = 1e-12);

/// Every labelled simple k-regular graph on n nodes (n <= 8), each as the
/// bitmask of its edges in the pair order (0,1),(0,2),...,(n-2,n-1).
std::vector<std::uint32_t> regular_graphs(int n, int k);
std::uint32_t edge_mask(int n, const std::vector<std::pair<std::uint32_t, std::uint32_t>>& edges);

/// max_j (sum_k |H_kj|^2 o_k - o_j) from a dense matrix.
double delta_o_dense(const MatrixXcd& h, const std::vector<double>& o);

/// Node degrees of the off-diagonal pattern of h.
std::vector<int> dense_degrees(const MatrixXcd& h, double zero = 1e-12);

/// Frozen node degree of the (L, n, d) family for L = 4..8, every valid
/// (n, d). Produced by an independent numpy Kronecker assembly.
const std::map<std::tuple<int, int, int>, int>& reference_degrees();

}  // namespace oracle

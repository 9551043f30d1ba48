#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "loceq/sparse.hpp"

namespace loceq {

/// Hard upper bound on the chain length accepted anywhere in the library.
inline constexpr int kMaxSites = 24;

/// Lattice size and the two locality degrees of a spin-1/2 chain
/// Hamiltonian: every term acts on exactly `bodies` sites whose diameter
/// (largest minus smallest site) is at most `diameter`.
struct LocalitySpec {
  int sites = 2;
  int bodies = 1;
  int diameter = 1;

  /// Throws DomainError unless 2 <= sites <= kMaxSites,
  /// 1 <= bodies <= sites and max(bodies - 1, 1) <= diameter <= sites - 1.
  void validate() const;
  std::size_t dimension() const { return std::size_t{1} << sites; }
  std::string to_string() const;

  friend bool operator==(const LocalitySpec&, const LocalitySpec&) = default;
};

enum class Pauli : std::uint8_t { kX = 0, kY = 1, kZ = 2 };

/// All supports of the Hamiltonian family as site bitmasks (bit i = site i),
/// in ascending mask order. For bodies == 1 these are the single sites;
/// otherwise every `bodies`-subset with diameter in [1, diameter].
std::vector<std::uint32_t> enumerate_supports(const LocalitySpec& spec);

/// One real coupling per (support, orientation tuple).
///
/// Orientation tuples are encoded in base 3: digit p (least significant
/// first) is the Pauli acting on the p-th lowest site of the support.
class CouplingSample {
 public:
  CouplingSample(LocalitySpec spec, std::vector<double> values);

  const LocalitySpec& spec() const { return spec_; }
  const std::vector<std::uint32_t>& supports() const { return supports_; }
  std::size_t orientations_per_support() const { return per_support_; }
  std::size_t size() const { return values_.size(); }
  std::span<const double> values() const { return values_; }

  double value(std::size_t support_index, std::size_t orientation) const {
    return values_[support_index * per_support_ + orientation];
  }
  /// Coupling of the term with the given support mask and one Pauli per
  /// support site (ascending site order). Throws DomainError if absent.
  double at(std::uint32_t support_mask, std::span<const Pauli> paulis) const;

 private:
  LocalitySpec spec_;
  std::vector<std::uint32_t> supports_;
  std::size_t per_support_ = 0;
  std::vector<double> values_;
};

/// Couplings drawn i.i.d. normal with mean 0 and standard deviation 1/2.
/// Deterministic in `seed`.
CouplingSample sample_couplings(const LocalitySpec& spec, std::uint64_t seed);

inline constexpr double kCouplingStddev = 0.5;

enum class ObservableMode { kRandomised, kHomogeneous };

/// Weighted z-magnetisation, diagonal in the spin-z product basis.
///
/// Nodes (indices into `eigenvalues`) are ordered by ascending eigenvalue;
/// ties (homogeneous weights) are broken by ascending bitmask. The
/// permutation node -> bitmask is the single source of node indexing.
class DiagonalObservable {
 public:
  DiagonalObservable(int sites, std::vector<double> weights,
                     ObservableMode mode);

  int sites() const { return sites_; }
  ObservableMode mode() const { return mode_; }
  std::size_t dimension() const { return eigenvalues_.size(); }
  const std::vector<double>& weights() const { return weights_; }
  /// Ascending eigenvalues o_j, one per node.
  const std::vector<double>& eigenvalues() const { return eigenvalues_; }
  /// node -> spin configuration bitmask (bit i set = site i up).
  const std::vector<std::uint32_t>& basis_perm() const { return perm_; }
  std::uint32_t node_of(std::uint32_t bitmask) const { return inverse_[bitmask]; }
  /// Number of up spins of the node's configuration.
  int up_count(std::size_t node) const;

  /// Eigenvalue of a configuration bitmask, (1/L) sum_i w_i (+1 up / -1 down).
  double eigenvalue_of(std::uint32_t bitmask) const;

 private:
  int sites_;
  ObservableMode mode_;
  std::vector<double> weights_;
  std::vector<double> eigenvalues_;
  std::vector<std::uint32_t> perm_;
  std::vector<std::uint32_t> inverse_;
};

/// Randomised weights are normal(1, 1/10); homogeneous weights are all 1.
DiagonalObservable build_observable(int sites, ObservableMode mode,
                                    std::uint64_t seed);

struct AssemblyLimits {
  /// Largest chain length for which full Hamiltonians are assembled.
  int max_sites = 16;
  /// Memory budget for the per-support local operators.
  std::size_t max_local_bytes = std::size_t{1} << 30;
};

/// Assembles H = sum over supports and orientation tuples of
/// a * (Kronecker product of Paulis on the support, identities elsewhere),
/// represented in the sorted eigenbasis of `obs`.
SparseHermitian build_hamiltonian(const LocalitySpec& spec,
                                  const CouplingSample& couplings,
                                  const DiagonalObservable& obs,
                                  const AssemblyLimits& limits = {});

/// Dense spectral norms are used up to this dimension; Lanczos above.
inline constexpr std::size_t kDenseNormMaxDim = 1024;

enum class NormMethod { kAuto, kDense, kLanczos };

/// Largest absolute eigenvalue. |result - norm| <= tol * norm.
double spectral_norm(const SparseHermitian& h, double tol = 1e-10,
                     NormMethod method = NormMethod::kAuto);

/// H / ||H|| with norm_hint = 1. Throws DomainError for the zero matrix.
SparseHermitian normalize(const SparseHermitian& h, double tol = 1e-12);

}  // namespace loceq

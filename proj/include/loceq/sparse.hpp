#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace loceq {

using Complex = std::complex<double>;

/// Entries with magnitude below this are floating-point dust and are not
/// stored. Exact cancellations of random couplings have probability zero.
inline constexpr double kStructuralZero = 1e-12;

struct MatrixEntry {
  std::uint64_t row = 0;
  std::uint64_t col = 0;
  Complex value;

  friend bool operator==(const MatrixEntry&, const MatrixEntry&) = default;
};

/// Hermitian matrix stored as its upper triangle (row <= col) in sorted
/// coordinate order. The lower triangle is implied by conjugate symmetry and
/// the diagonal is real, so Hermiticity holds by construction.
class SparseHermitian {
 public:
  SparseHermitian() = default;

  /// Builds from upper-triangle entries in any order. Duplicates are summed,
  /// entries below kStructuralZero are dropped and diagonal imaginary parts
  /// are discarded. Throws DomainError on row > col or out-of-range indices.
  static SparseHermitian from_upper(std::size_t dim,
                                    std::vector<MatrixEntry> entries,
                                    std::optional<double> norm_hint = {});

  std::size_t dim() const { return dim_; }
  const std::vector<MatrixEntry>& entries() const { return entries_; }
  std::optional<double> norm_hint() const { return norm_hint_; }

  /// Number of nonzero elements of the full matrix (both triangles).
  std::size_t nonzero_count() const;
  std::size_t diagonal_count() const;

  /// Element (row, col) of the full matrix.
  Complex at(std::size_t row, std::size_t col) const;

  SparseHermitian scaled(double factor,
                         std::optional<double> norm_hint = {}) const;

  Eigen::MatrixXcd to_dense() const;

  friend bool operator==(const SparseHermitian&,
                         const SparseHermitian&) = default;

 private:
  std::size_t dim_ = 0;
  std::vector<MatrixEntry> entries_;
  std::optional<double> norm_hint_;
};

/// Full (both triangles) compressed-row copy used for matrix-vector products.
struct CsrMatrix {
  std::size_t dim = 0;
  std::vector<std::size_t> row_ptr;
  std::vector<std::uint32_t> cols;
  std::vector<Complex> values;

  void multiply(std::span<const Complex> x, std::span<Complex> y) const;
  /// Maximum absolute column sum; bounds the spectral norm from above.
  double one_norm() const;
};

CsrMatrix to_csr(const SparseHermitian& h);

}  // namespace loceq

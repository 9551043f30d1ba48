#include "loceq/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "loceq/errors.hpp"

namespace loceq {

SparseHermitian SparseHermitian::from_upper(std::size_t dim,
                                            std::vector<MatrixEntry> entries,
                                            std::optional<double> norm_hint) {
  for (const auto& e : entries) {
    if (e.row > e.col || e.col >= dim) {
      throw DomainError("entry (" + std::to_string(e.row) + ", " +
                        std::to_string(e.col) +
                        ") is not in the upper triangle of a " +
                        std::to_string(dim) + "-dimensional matrix");
    }
  }
  std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });

  SparseHermitian h;
  h.dim_ = dim;
  h.norm_hint_ = norm_hint;
  h.entries_.reserve(entries.size());
  for (std::size_t i = 0; i < entries.size();) {
    MatrixEntry merged = entries[i];
    std::size_t j = i + 1;
    while (j < entries.size() && entries[j].row == merged.row &&
           entries[j].col == merged.col) {
      merged.value += entries[j].value;
      ++j;
    }
    if (merged.row == merged.col) merged.value = merged.value.real();
    if (std::abs(merged.value) >= kStructuralZero) h.entries_.push_back(merged);
    i = j;
  }
  return h;
}

std::size_t SparseHermitian::nonzero_count() const {
  return 2 * entries_.size() - diagonal_count();
}

std::size_t SparseHermitian::diagonal_count() const {
  return static_cast<std::size_t>(
      std::count_if(entries_.begin(), entries_.end(),
                    [](const auto& e) { return e.row == e.col; }));
}

Complex SparseHermitian::at(std::size_t row, std::size_t col) const {
  const bool lower = row > col;
  if (lower) std::swap(row, col);
  auto it = std::lower_bound(
      entries_.begin(), entries_.end(), std::pair{row, col},
      [](const MatrixEntry& e, const std::pair<std::size_t, std::size_t>& key) {
        return e.row != key.first ? e.row < key.first : e.col < key.second;
      });
  if (it == entries_.end() || it->row != row || it->col != col) return {};
  return lower ? std::conj(it->value) : it->value;
}

SparseHermitian SparseHermitian::scaled(double factor,
                                        std::optional<double> norm_hint) const {
  SparseHermitian out = *this;
  for (auto& e : out.entries_) e.value *= factor;
  out.norm_hint_ = norm_hint;
  return out;
}

Eigen::MatrixXcd SparseHermitian::to_dense() const {
  const auto n = static_cast<Eigen::Index>(dim_);
  Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(n, n);
  for (const auto& e : entries_) {
    const auto r = static_cast<Eigen::Index>(e.row);
    const auto c = static_cast<Eigen::Index>(e.col);
    m(r, c) = e.value;
    m(c, r) = std::conj(e.value);
  }
  return m;
}

void CsrMatrix::multiply(std::span<const Complex> x,
                         std::span<Complex> y) const {
  for (std::size_t r = 0; r < dim; ++r) {
    Complex acc{};
    for (std::size_t p = row_ptr[r]; p < row_ptr[r + 1]; ++p) {
      acc += values[p] * x[cols[p]];
    }
    y[r] = acc;
  }
}

double CsrMatrix::one_norm() const {
  // Hermitian: column sums equal row sums.
  double best = 0.0;
  for (std::size_t r = 0; r < dim; ++r) {
    double sum = 0.0;
    for (std::size_t p = row_ptr[r]; p < row_ptr[r + 1]; ++p) {
      sum += std::abs(values[p]);
    }
    best = std::max(best, sum);
  }
  return best;
}

CsrMatrix to_csr(const SparseHermitian& h) {
  CsrMatrix m;
  m.dim = h.dim();
  std::vector<std::size_t> counts(m.dim, 0);
  for (const auto& e : h.entries()) {
    ++counts[e.row];
    if (e.row != e.col) ++counts[e.col];
  }
  m.row_ptr.assign(m.dim + 1, 0);
  for (std::size_t r = 0; r < m.dim; ++r) {
    m.row_ptr[r + 1] = m.row_ptr[r] + counts[r];
  }
  m.cols.resize(m.row_ptr.back());
  m.values.resize(m.row_ptr.back());
  std::vector<std::size_t> fill(m.row_ptr.begin(), m.row_ptr.end() - 1);
  // Mirrored lower-triangle entries (columns < r) go first, then the stored
  // upper entries, so every CSR row is column-sorted.
  for (const auto& e : h.entries()) {
    if (e.row != e.col) {
      const auto p = fill[e.col]++;
      m.cols[p] = static_cast<std::uint32_t>(e.row);
      m.values[p] = std::conj(e.value);
    }
  }
  for (const auto& e : h.entries()) {
    const auto p = fill[e.row]++;
    m.cols[p] = static_cast<std::uint32_t>(e.col);
    m.values[p] = e.value;
  }
  return m;
}

}  // namespace loceq

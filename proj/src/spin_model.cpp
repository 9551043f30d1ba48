#include "loceq/spin_model.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <numeric>

#include "loceq/errors.hpp"
#include "loceq/linalg.hpp"
#include "loceq/rng.hpp"

namespace loceq {

namespace {

std::size_t pow3(int n) {
  std::size_t p = 1;
  for (int i = 0; i < n; ++i) p *= 3;
  return p;
}

// 2x2 Pauli matrix in the local basis {0 = down, 1 = up}, as the single
// nonzero of each column: column `in` maps to row `in ^ flip` with `phase`.
struct Monomial {
  std::uint32_t flip;
  std::array<Complex, 2> phase;  // indexed by input bit
};

Monomial pauli_monomial(Pauli p) {
  switch (p) {
    case Pauli::kX:
      return {1, {Complex(1, 0), Complex(1, 0)}};
    case Pauli::kY:
      // sigma^y |up> = i |down>, sigma^y |down> = -i |up>
      return {1, {Complex(0, -1), Complex(0, 1)}};
    case Pauli::kZ:
    default:
      return {0, {Complex(-1, 0), Complex(1, 0)}};
  }
}

// Coordinate-form local operator on a support of n sites.
struct LocalOperator {
  int bodies = 0;
  std::vector<Complex> dense;  // row-major 2^n x 2^n

  Complex& operator()(std::uint32_t row, std::uint32_t col) {
    return dense[(std::size_t{row} << bodies) + col];
  }
  Complex operator()(std::uint32_t row, std::uint32_t col) const {
    return dense[(std::size_t{row} << bodies) + col];
  }
};

// Kronecker product kron(P_{n-1}, ..., P_0) of single-site Paulis, where
// local bit p corresponds to factor p counted from the right. Each factor is
// a monomial matrix, so the product has exactly one nonzero per column.
void add_pauli_string(LocalOperator& op, std::span<const Pauli> paulis,
                      double coupling) {
  const std::uint32_t local_dim = 1u << op.bodies;
  std::array<Monomial, 32> factors{};
  std::uint32_t flip = 0;
  for (std::size_t p = 0; p < paulis.size(); ++p) {
    factors[p] = pauli_monomial(paulis[p]);
    flip |= factors[p].flip << p;
  }
  for (std::uint32_t in = 0; in < local_dim; ++in) {
    Complex phase(coupling, 0.0);
    for (std::size_t p = 0; p < paulis.size(); ++p) {
      phase *= factors[p].phase[(in >> p) & 1u];
    }
    op(in ^ flip, in) += phase;
  }
}

std::uint32_t gather_bits(std::uint32_t value, std::span<const int> sites) {
  std::uint32_t out = 0;
  for (std::size_t p = 0; p < sites.size(); ++p) {
    out |= ((value >> sites[p]) & 1u) << p;
  }
  return out;
}

std::vector<int> sites_of(std::uint32_t mask) {
  std::vector<int> sites;
  for (int i = 0; mask != 0; ++i, mask >>= 1) {
    if (mask & 1u) sites.push_back(i);
  }
  return sites;
}

}  // namespace

void LocalitySpec::validate() const {
  if (sites < 2 || sites > kMaxSites) {
    throw DomainError("chain length L=" + std::to_string(sites) +
                      " outside [2, " + std::to_string(kMaxSites) + "]");
  }
  if (bodies < 1 || bodies > sites) {
    throw DomainError("body count n=" + std::to_string(bodies) +
                      " outside [1, L]");
  }
  const int min_diameter = std::max(bodies - 1, 1);
  if (diameter < min_diameter || diameter > sites - 1) {
    throw DomainError("diameter d=" + std::to_string(diameter) +
                      " outside [" + std::to_string(min_diameter) +
                      ", L-1] for n=" + std::to_string(bodies));
  }
}

std::string LocalitySpec::to_string() const {
  return "L=" + std::to_string(sites) + " n=" + std::to_string(bodies) +
         " d=" + std::to_string(diameter);
}

std::vector<std::uint32_t> enumerate_supports(const LocalitySpec& spec) {
  spec.validate();
  std::vector<std::uint32_t> supports;
  const std::uint64_t limit = std::uint64_t{1} << spec.sites;
  // Gosper's hack walks all masks with exactly `bodies` bits set in
  // ascending order.
  std::uint64_t mask = (std::uint64_t{1} << spec.bodies) - 1;
  while (mask < limit) {
    const int lowest = std::countr_zero(mask);
    const int highest = 63 - std::countl_zero(mask);
    const int diam = highest - lowest;
    const bool keep = spec.bodies == 1 ? true
                                       : (diam >= 1 && diam <= spec.diameter);
    if (keep) supports.push_back(static_cast<std::uint32_t>(mask));
    const std::uint64_t c = mask & (~mask + 1);
    const std::uint64_t r = mask + c;
    mask = (((r ^ mask) >> 2) / c) | r;
  }
  return supports;
}

CouplingSample::CouplingSample(LocalitySpec spec, std::vector<double> values)
    : spec_(spec),
      supports_(enumerate_supports(spec)),
      per_support_(pow3(spec.bodies)),
      values_(std::move(values)) {
  if (values_.size() != supports_.size() * per_support_) {
    throw DomainError("coupling count " + std::to_string(values_.size()) +
                      " does not match " +
                      std::to_string(supports_.size() * per_support_) +
                      " terms for " + spec_.to_string());
  }
}

double CouplingSample::at(std::uint32_t support_mask,
                          std::span<const Pauli> paulis) const {
  auto it = std::lower_bound(supports_.begin(), supports_.end(), support_mask);
  if (it == supports_.end() || *it != support_mask ||
      paulis.size() != static_cast<std::size_t>(spec_.bodies)) {
    throw DomainError("no coupling for the requested support/orientation");
  }
  std::size_t code = 0;
  for (std::size_t p = paulis.size(); p-- > 0;) {
    code = code * 3 + static_cast<std::size_t>(paulis[p]);
  }
  return value(static_cast<std::size_t>(it - supports_.begin()), code);
}

CouplingSample sample_couplings(const LocalitySpec& spec, std::uint64_t seed) {
  const auto supports = enumerate_supports(spec);
  const std::size_t count = supports.size() * pow3(spec.bodies);
  Rng rng(seed, Stream::kCouplings);
  std::vector<double> values(count);
  for (auto& v : values) v = rng.normal(0.0, kCouplingStddev);
  return CouplingSample(spec, std::move(values));
}

DiagonalObservable::DiagonalObservable(int sites, std::vector<double> weights,
                                       ObservableMode mode)
    : sites_(sites), mode_(mode), weights_(std::move(weights)) {
  if (sites < 1 || sites > kMaxSites) {
    throw DomainError("observable chain length outside [1, 24]");
  }
  if (weights_.size() != static_cast<std::size_t>(sites)) {
    throw DomainError("observable needs one weight per site");
  }
  const std::size_t dim = std::size_t{1} << sites;
  std::vector<double> value(dim);
  for (std::size_t s = 0; s < dim; ++s) {
    value[s] = eigenvalue_of(static_cast<std::uint32_t>(s));
  }
  perm_.resize(dim);
  std::iota(perm_.begin(), perm_.end(), 0u);
  if (mode_ == ObservableMode::kHomogeneous) {
    // Exact block boundaries from integer up-spin counts.
    std::stable_sort(perm_.begin(), perm_.end(),
                     [](std::uint32_t a, std::uint32_t b) {
                       return std::popcount(a) < std::popcount(b);
                     });
  } else {
    std::stable_sort(perm_.begin(), perm_.end(),
                     [&](std::uint32_t a, std::uint32_t b) {
                       return value[a] < value[b];
                     });
  }
  eigenvalues_.resize(dim);
  inverse_.resize(dim);
  for (std::size_t j = 0; j < dim; ++j) {
    eigenvalues_[j] = value[perm_[j]];
    inverse_[perm_[j]] = static_cast<std::uint32_t>(j);
  }
}

int DiagonalObservable::up_count(std::size_t node) const {
  return std::popcount(perm_[node]);
}

double DiagonalObservable::eigenvalue_of(std::uint32_t bitmask) const {
  if (mode_ == ObservableMode::kHomogeneous) {
    return static_cast<double>(2 * std::popcount(bitmask) - sites_) / sites_;
  }
  double sum = 0.0;
  for (int i = 0; i < sites_; ++i) {
    sum += ((bitmask >> i) & 1u) ? weights_[static_cast<std::size_t>(i)]
                                 : -weights_[static_cast<std::size_t>(i)];
  }
  return sum / sites_;
}

DiagonalObservable build_observable(int sites, ObservableMode mode,
                                    std::uint64_t seed) {
  if (sites < 1 || sites > kMaxSites) {
    throw DomainError("observable chain length outside [1, 24]");
  }
  std::vector<double> weights(static_cast<std::size_t>(sites), 1.0);
  if (mode == ObservableMode::kRandomised) {
    Rng rng(seed, Stream::kObservable);
    for (auto& w : weights) w = rng.normal(1.0, 0.1);
  }
  return DiagonalObservable(sites, std::move(weights), mode);
}

SparseHermitian build_hamiltonian(const LocalitySpec& spec,
                                  const CouplingSample& couplings,
                                  const DiagonalObservable& obs,
                                  const AssemblyLimits& limits) {
  spec.validate();
  if (!(couplings.spec() == spec)) {
    throw DomainError("couplings were sampled for " +
                      couplings.spec().to_string() + ", not " +
                      spec.to_string());
  }
  if (obs.sites() != spec.sites) {
    throw DomainError("observable and Hamiltonian chain lengths differ");
  }
  if (spec.sites > limits.max_sites) {
    throw CapExceeded("Hamiltonian assembly capped at L=" +
                      std::to_string(limits.max_sites));
  }
  const auto& supports = couplings.supports();
  const std::size_t local_dim = std::size_t{1} << spec.bodies;
  const std::size_t local_bytes =
      supports.size() * local_dim * local_dim * sizeof(Complex);
  if (local_bytes > limits.max_local_bytes) {
    throw CapExceeded("local operators for " + spec.to_string() +
                      " exceed the assembly memory budget");
  }

  // Local operator per support: sum over orientation tuples of
  // a(chi, phi) * kron(paulis).
  std::vector<LocalOperator> locals(supports.size());
  std::vector<std::vector<int>> support_sites(supports.size());
  std::vector<std::vector<std::uint32_t>> scatter(supports.size());
  std::vector<Pauli> paulis(static_cast<std::size_t>(spec.bodies));
  for (std::size_t s = 0; s < supports.size(); ++s) {
    auto& op = locals[s];
    op.bodies = spec.bodies;
    op.dense.assign(local_dim * local_dim, Complex{});
    for (std::size_t code = 0; code < couplings.orientations_per_support();
         ++code) {
      std::size_t c = code;
      for (auto& p : paulis) {
        p = static_cast<Pauli>(c % 3);
        c /= 3;
      }
      add_pauli_string(op, paulis, couplings.value(s, code));
    }
    support_sites[s] = sites_of(supports[s]);
    scatter[s].resize(local_dim);
    for (std::uint32_t local = 0; local < local_dim; ++local) {
      std::uint32_t global = 0;
      for (std::size_t p = 0; p < support_sites[s].size(); ++p) {
        global |= ((local >> p) & 1u) << support_sites[s][p];
      }
      scatter[s][local] = global;
    }
  }

  // Column-by-column assembly with a sparse accumulator; each global
  // configuration is an identity on the sites outside the support.
  const std::size_t dim = spec.dimension();
  std::vector<Complex> accumulator(dim);
  std::vector<char> touched(dim, 0);
  std::vector<std::uint32_t> rows;
  std::vector<MatrixEntry> entries;
  for (std::uint32_t col_mask = 0; col_mask < dim; ++col_mask) {
    const std::uint32_t col_node = obs.node_of(col_mask);
    rows.clear();
    for (std::size_t s = 0; s < supports.size(); ++s) {
      const std::uint32_t rest = col_mask & ~supports[s];
      const std::uint32_t in = gather_bits(col_mask, support_sites[s]);
      for (std::uint32_t out = 0; out < local_dim; ++out) {
        const Complex v = locals[s](out, in);
        if (v == Complex{}) continue;
        const std::uint32_t row_mask = rest | scatter[s][out];
        if (!touched[row_mask]) {
          touched[row_mask] = 1;
          rows.push_back(row_mask);
        }
        accumulator[row_mask] += v;
      }
    }
    for (const std::uint32_t row_mask : rows) {
      const std::uint32_t row_node = obs.node_of(row_mask);
      const Complex v = accumulator[row_mask];
      accumulator[row_mask] = Complex{};
      touched[row_mask] = 0;
      if (row_node <= col_node && std::abs(v) >= kStructuralZero) {
        entries.push_back({row_node, col_node, v});
      }
    }
  }
  return SparseHermitian::from_upper(dim, std::move(entries));
}

double spectral_norm(const SparseHermitian& h, double tol, NormMethod method) {
  if (h.dim() == 0) return 0.0;
  if (method == NormMethod::kAuto) {
    method = h.dim() <= kDenseNormMaxDim ? NormMethod::kDense
                                         : NormMethod::kLanczos;
  }
  if (method == NormMethod::kDense) {
    const Eigen::VectorXd w = hermitian_eigenvalues(h.to_dense());
    return std::max(std::abs(w(0)), std::abs(w(w.size() - 1)));
  }
  const auto ext = lanczos_extremes(to_csr(h), tol);
  return std::max(std::abs(ext.lowest), std::abs(ext.highest));
}

SparseHermitian normalize(const SparseHermitian& h, double tol) {
  if (h.norm_hint() && *h.norm_hint() == 1.0) return h;
  const double norm = spectral_norm(h, tol);
  if (!(norm > 0.0)) throw DomainError("cannot normalise the zero matrix");
  return h.scaled(1.0 / norm, 1.0);
}

}  // namespace loceq

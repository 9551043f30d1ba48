#include "loceq/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <lapacke.h>

#include "loceq/errors.hpp"
#include "loceq/rng.hpp"

namespace loceq {

namespace {

void run_zheevd(char jobz, Eigen::MatrixXcd& a, Eigen::VectorXd& w) {
  const auto n = static_cast<lapack_int>(a.rows());
  w.resize(n);
  if (n == 0) return;
  const lapack_int info = LAPACKE_zheevd(
      LAPACK_COL_MAJOR, jobz, 'U', n,
      reinterpret_cast<lapack_complex_double*>(a.data()), n, w.data());
  if (info != 0) {
    throw ConvergenceError("zheevd failed with info " + std::to_string(info));
  }
}

}  // namespace

Eigen::VectorXd hermitian_eigenvalues(Eigen::MatrixXcd a) {
  Eigen::VectorXd w;
  run_zheevd('N', a, w);
  return w;
}

HermitianEigensystem hermitian_eigensystem(Eigen::MatrixXcd a) {
  HermitianEigensystem sys;
  run_zheevd('V', a, sys.values);
  sys.vectors = std::move(a);
  return sys;
}

ExtremalEigenvalues lanczos_extremes(const CsrMatrix& h, double tol,
                                     int max_iterations) {
  const std::size_t n = h.dim;
  if (n == 0) return {};
  const int max_steps = static_cast<int>(
      std::min<std::size_t>(n, static_cast<std::size_t>(max_iterations)));

  // Fixed start vector: results are reproducible run to run.
  Rng rng(0x5eed1a9c2ull, Stream::kOracle);
  std::vector<std::vector<Complex>> basis;
  std::vector<Complex> v(n);
  for (auto& x : v) x = Complex(rng.uniform() - 0.5, rng.uniform() - 0.5);

  auto normalize = [](std::vector<Complex>& x) {
    double s = 0.0;
    for (const auto& c : x) s += std::norm(c);
    s = std::sqrt(s);
    for (auto& c : x) c /= s;
    return s;
  };
  normalize(v);

  std::vector<double> alpha, beta;
  std::vector<Complex> w(n);
  ExtremalEigenvalues out;
  for (int step = 0; step < max_steps; ++step) {
    basis.push_back(v);
    h.multiply(v, w);
    Complex a{};
    for (std::size_t i = 0; i < n; ++i) a += std::conj(v[i]) * w[i];
    alpha.push_back(a.real());
    // Full reorthogonalisation, applied twice for stability.
    for (int pass = 0; pass < 2; ++pass) {
      for (const auto& q : basis) {
        Complex proj{};
        for (std::size_t i = 0; i < n; ++i) proj += std::conj(q[i]) * w[i];
        for (std::size_t i = 0; i < n; ++i) w[i] -= proj * q[i];
      }
    }
    double b = 0.0;
    for (const auto& c : w) b += std::norm(c);
    b = std::sqrt(b);

    const int m = step + 1;
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(m, m);
    for (int i = 0; i < m; ++i) {
      t(i, i) = alpha[static_cast<std::size_t>(i)];
      if (i + 1 < m) {
        t(i, i + 1) = t(i + 1, i) = beta[static_cast<std::size_t>(i)];
      }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ritz(t);
    const double lo = ritz.eigenvalues()(0);
    const double hi = ritz.eigenvalues()(m - 1);
    const double res_lo = std::abs(b * ritz.eigenvectors()(m - 1, 0));
    const double res_hi = std::abs(b * ritz.eigenvectors()(m - 1, m - 1));
    const double scale = std::max({std::abs(lo), std::abs(hi), 1e-300});
    out = {lo, hi, m};
    const bool exhausted = b <= 1e-14 * scale || m == static_cast<int>(n);
    if (exhausted || (res_lo <= tol * scale && res_hi <= tol * scale)) {
      return out;
    }
    beta.push_back(b);
    for (std::size_t i = 0; i < n; ++i) v[i] = w[i] / b;
  }
  throw ConvergenceError("Lanczos did not converge within " +
                         std::to_string(max_steps) + " iterations");
}

}  // namespace loceq

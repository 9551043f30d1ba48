#pragma once

#include <Eigen/Dense>

#include "loceq/sparse.hpp"

namespace loceq {

struct HermitianEigensystem {
  Eigen::VectorXd values;   // ascending
  Eigen::MatrixXcd vectors;  // column i belongs to values(i)
};

/// Eigenvalues of a dense Hermitian matrix (LAPACK zheevd), ascending.
Eigen::VectorXd hermitian_eigenvalues(Eigen::MatrixXcd a);
HermitianEigensystem hermitian_eigensystem(Eigen::MatrixXcd a);

struct ExtremalEigenvalues {
  double lowest = 0.0;
  double highest = 0.0;
  int iterations = 0;
};

/// Lowest and highest eigenvalue of a sparse Hermitian matrix by Lanczos with
/// full reorthogonalisation. Converged when the residual bound of both Ritz
/// values is below tol * max(|lowest|, |highest|). Throws ConvergenceError
/// after max_iterations.
ExtremalEigenvalues lanczos_extremes(const CsrMatrix& h, double tol,
                                     int max_iterations = 600);

}  // namespace loceq

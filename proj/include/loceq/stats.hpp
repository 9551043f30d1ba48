#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace loceq {

struct MeanStderr {
  double mean = 0.0;
  double stderr_ = 0.0;
  std::size_t count = 0;
};

/// Sample mean and standard error (stddev with n - 1, over sqrt(n)).
/// A single value yields stderr 0. Throws DomainError when empty.
MeanStderr mean_stderr(std::span<const double> values);

/// Unbiased sample standard deviation; 0 for fewer than two values.
double sample_stddev(std::span<const double> values);

/// Ordinary least squares y = slope * x + intercept.
struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_stderr = 0.0;
  double intercept_stderr = 0.0;
  double r_squared = 0.0;
  double x_min = 0.0;
  double x_max = 0.0;
  std::vector<double> residuals;

  double operator()(double x) const { return slope * x + intercept; }
};

/// Throws DomainError for fewer than two points or a singular design
/// (all x equal).
LinearFit fit_linear(std::span<const double> x, std::span<const double> y);

/// y = exp(a * x^b), fitted by Gauss-Newton on log y = a * x^b.
struct PowerExpFit {
  double a = 0.0;
  double b = 0.0;
  double x_min = 0.0;
  double x_max = 0.0;
  /// y_i - fit(x_i)
  std::vector<double> residuals;

  double operator()(double x) const;
};

/// Needs >= 3 points with positive x and positive y, and log y not all zero.
/// Throws DomainError or ConvergenceError.
PowerExpFit fit_power_exp(std::span<const double> x, std::span<const double> y);

struct Correlation {
  double coefficient = 0.0;
  double p_value = 1.0;  // two-sided, Student t with n - 2 dof
  std::size_t count = 0;
};

/// Throws DomainError on mismatched or too short input and on zero variance.
Correlation pearson(std::span<const double> x, std::span<const double> y);
/// Pearson on mid-ranks.
Correlation spearman(std::span<const double> x, std::span<const double> y);

/// Mid-ranks (1-based, ties averaged).
std::vector<double> ranks(std::span<const double> values);

}  // namespace loceq

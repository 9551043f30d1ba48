#include "loceq/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <boost/math/distributions/students_t.hpp>
#include <boost/math/tools/minima.hpp>

#include "loceq/errors.hpp"

namespace loceq {

MeanStderr mean_stderr(std::span<const double> values) {
  if (values.empty()) throw DomainError("mean of an empty sample");
  MeanStderr out;
  out.count = values.size();
  out.mean = std::accumulate(values.begin(), values.end(), 0.0) /
             static_cast<double>(values.size());
  out.stderr_ = sample_stddev(values) / std::sqrt(static_cast<double>(out.count));
  return out;
}

double sample_stddev(std::span<const double> values) {
  const std::size_t n = values.size();
  if (n < 2) return 0.0;
  const double mean =
      std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(n);
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / static_cast<double>(n - 1));
}

LinearFit fit_linear(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DomainError("fit input lengths differ");
  const std::size_t n = x.size();
  if (n < 2) throw DomainError("linear fit needs at least two points");
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (!(sxx > 0.0)) throw DomainError("singular design: all x values equal");

  LinearFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.x_min = *std::min_element(x.begin(), x.end());
  fit.x_max = *std::max_element(x.begin(), x.end());
  fit.residuals.resize(n);
  double sse = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    fit.residuals[i] = y[i] - fit(x[i]);
    sse += fit.residuals[i] * fit.residuals[i];
  }
  fit.r_squared = syy > 0.0 ? 1.0 - sse / syy : 1.0;
  if (n > 2) {
    const double s2 = sse / static_cast<double>(n - 2);
    fit.slope_stderr = std::sqrt(s2 / sxx);
    fit.intercept_stderr =
        std::sqrt(s2 * (1.0 / static_cast<double>(n) + mx * mx / sxx));
  }
  return fit;
}

double PowerExpFit::operator()(double x) const {
  return std::exp(a * std::pow(x, b));
}

PowerExpFit fit_power_exp(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DomainError("fit input lengths differ");
  const std::size_t n = x.size();
  if (n < 3) throw DomainError("exp(a x^b) fit needs at least three points");
  std::vector<double> g(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) {
      throw DomainError("exp(a x^b) fit needs positive x and y");
    }
    g[i] = std::log(y[i]);
  }
  if (std::all_of(g.begin(), g.end(), [](double v) { return v == 0.0; })) {
    throw DomainError("degenerate exp(a x^b) fit: all y equal to 1");
  }

  // For fixed b the model log y = a x^b is linear in a, so minimise the
  // profiled residual over b alone.
  auto best_a = [&](double b) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double p = std::pow(x[i], b);
      num += g[i] * p;
      den += p * p;
    }
    return num / den;
  };
  auto cost = [&](double b) {
    const double a = best_a(b);
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double r = g[i] - a * std::pow(x[i], b);
      s += r * r;
    }
    return s;
  };

  // Coarse scan guards against picking a non-global local minimum.
  constexpr double kLo = -6.0, kHi = 6.0;
  constexpr int kGrid = 480;
  double best_b = kLo, best_cost = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= kGrid; ++i) {
    const double b = kLo + (kHi - kLo) * i / kGrid;
    const double c = cost(b);
    if (c < best_cost) {
      best_cost = c;
      best_b = b;
    }
  }
  const double step = (kHi - kLo) / kGrid;
  const auto [b, c] = boost::math::tools::brent_find_minima(
      cost, std::max(kLo, best_b - step), std::min(kHi, best_b + step), 52);
  if (!std::isfinite(c)) throw ConvergenceError("exp(a x^b) fit diverged");

  PowerExpFit fit;
  fit.b = b;
  fit.a = best_a(b);
  fit.x_min = *std::min_element(x.begin(), x.end());
  fit.x_max = *std::max_element(x.begin(), x.end());
  fit.residuals.resize(n);
  for (std::size_t i = 0; i < n; ++i) fit.residuals[i] = y[i] - fit(x[i]);
  return fit;
}

Correlation pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DomainError("correlation input lengths differ");
  const std::size_t n = x.size();
  if (n < 3) throw DomainError("correlation needs at least three pairs");
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (!(sxx > 0.0) || !(syy > 0.0)) {
    throw DomainError("degenerate variance in correlation input");
  }
  Correlation out;
  out.count = n;
  out.coefficient = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
  const double dof = static_cast<double>(n - 2);
  const double r2 = out.coefficient * out.coefficient;
  if (r2 >= 1.0) {
    out.p_value = 0.0;
  } else {
    const double t = out.coefficient * std::sqrt(dof / (1.0 - r2));
    boost::math::students_t dist(dof);
    out.p_value = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
  }
  return out;
}

std::vector<double> ranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double mid = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) out[order[k]] = mid;
    i = j + 1;
  }
  return out;
}

Correlation spearman(std::span<const double> x, std::span<const double> y) {
  const auto rx = ranks(x);
  const auto ry = ranks(y);
  return pearson(rx, ry);
}

}  // namespace loceq

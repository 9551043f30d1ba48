#include <cmath>
#include <limits>
#include <vector>

#include "doctest.h"
#include "loceq/errors.hpp"
#include "loceq/stats.hpp"

using namespace loceq;

TEST_SUITE("stats") {

TEST_CASE("mean and standard error") {
  const std::vector<double> v = {1, 2, 3, 4};
  const auto m = mean_stderr(v);
  CHECK(m.mean == 2.5);
  CHECK(m.stderr_ == doctest::Approx(std::sqrt(5.0 / 3.0) / 2.0));
  CHECK(m.count == 4);
  CHECK(mean_stderr(std::vector<double>{7}).stderr_ == 0.0);
  CHECK_THROWS_AS(mean_stderr(std::vector<double>{}), DomainError);
}

TEST_CASE("linear fit recovers exact line") {
  const std::vector<double> x = {4, 5, 6, 7, 8};
  std::vector<double> y;
  for (double v : x) y.push_back(2 * v + 1);
  const auto f = fit_linear(x, y);
  CHECK(f.slope == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(f.intercept == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(f.r_squared == doctest::Approx(1.0));
  CHECK(f.slope_stderr < 1e-10);
  REQUIRE(f.residuals.size() == 5);
  for (double r : f.residuals) CHECK(std::abs(r) < 1e-12);
  CHECK_THROWS_AS(fit_linear(std::vector<double>{1, 1}, std::vector<double>{1, 2}),
                  DomainError);
}

TEST_CASE("linear fit standard errors") {
  // Frozen against an ordinary least squares reference (statsmodels).
  const std::vector<double> x = {1, 2, 3, 4, 5, 6};
  const std::vector<double> y = {1.1, 1.9, 3.2, 3.8, 5.3, 5.9};
  const auto f = fit_linear(x, y);
  CHECK(f.slope == doctest::Approx(0.99428571428571).epsilon(1e-9));
  CHECK(f.intercept == doctest::Approx(0.05333333333333).epsilon(1e-9));
  CHECK(f.slope_stderr == doctest::Approx(0.0524761).epsilon(1e-5));
  CHECK(f.intercept_stderr == doctest::Approx(0.20436506).epsilon(1e-5));
}

TEST_CASE("power-exponential fit recovers parameters") {
  std::vector<double> x, y;
  for (int L = 4; L <= 10; ++L) {
    x.push_back(L);
    y.push_back(std::exp(0.3 * std::pow(L, 0.5)));
  }
  const auto f = fit_power_exp(x, y);
  CHECK(std::abs(f.a - 0.3) < 1e-6);
  CHECK(std::abs(f.b - 0.5) < 1e-6);
  CHECK(f(9.0) == doctest::Approx(std::exp(0.9)).epsilon(1e-6));
}

TEST_CASE("pearson and spearman") {
  // Reference values from scipy.stats.
  const std::vector<double> x = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  const std::vector<double> y = {2.1, 3.9, 6.2, 7.8, 10.5, 11.7, 14.1, 16.3, 17.8, 20.4};
  const auto c = pearson(x, y);
  CHECK(c.coefficient == doctest::Approx(0.9990236943107245).epsilon(1e-12));
  CHECK(c.p_value == doctest::Approx(3.970200517891159e-12).epsilon(1e-6));
  const std::vector<double> y2 = {5, 3, 4, 1, 2, 8, 7, 6, 10, 9};
  const auto c2 = pearson(x, y2);
  CHECK(c2.coefficient == doctest::Approx(0.721212121212121).epsilon(1e-12));
  CHECK(c2.p_value == doctest::Approx(0.01857315508946024).epsilon(1e-8));
  std::vector<double> sq;
  for (double v : x) sq.push_back(v * v);
  CHECK(spearman(x, sq).coefficient == doctest::Approx(1.0));
  CHECK(spearman(std::vector<double>{1, 2, 2, 3}, std::vector<double>{4, 3, 3, 1})
            .coefficient == doctest::Approx(-1.0));
  CHECK_THROWS_AS(pearson(x, std::vector<double>(10, 1.0)), DomainError);
  CHECK_THROWS_AS(pearson(std::vector<double>{1, 2}, std::vector<double>{1, 2}),
                  DomainError);
}

TEST_CASE("mid ranks") {
  const auto r = ranks(std::vector<double>{10, 20, 20, 5});
  CHECK(r == std::vector<double>{2, 3.5, 3.5, 1});
}

}

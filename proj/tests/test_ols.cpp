#include <catch2/catch.hpp>

#include <cmath>
#include <random>
#include <vector>

#include "audit/stats/ols.hpp"

using namespace audit::stats;

// Normal-equations reference: build X'X and X'y outright and solve by
// Gauss-Jordan with partial pivoting. Slow and simple on purpose.
namespace refols {

struct Solution {
  std::vector<double> beta;
  std::vector<double> se;
  double rss = 0.0;
  double r2 = 0.0;
  double adjusted_r2 = 0.0;
};

Solution solve(const std::vector<std::vector<double>>& cols_with_intercept,
               const std::vector<double>& y) {
  const std::size_t p = cols_with_intercept.size();
  const std::size_t n = y.size();

  std::vector<std::vector<double>> xtx(p, std::vector<double>(p, 0.0));
  std::vector<double> xty(p, 0.0);
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = 0; j < p; ++j)
      for (std::size_t r = 0; r < n; ++r)
        xtx[i][j] += cols_with_intercept[i][r] * cols_with_intercept[j][r];
    for (std::size_t r = 0; r < n; ++r) xty[i] += cols_with_intercept[i][r] * y[r];
  }

  // invert X'X by Gauss-Jordan
  std::vector<std::vector<double>> aug(p, std::vector<double>(2 * p, 0.0));
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = 0; j < p; ++j) aug[i][j] = xtx[i][j];
    aug[i][p + i] = 1.0;
  }
  for (std::size_t k = 0; k < p; ++k) {
    std::size_t pivot = k;
    for (std::size_t i = k + 1; i < p; ++i)
      if (std::fabs(aug[i][k]) > std::fabs(aug[pivot][k])) pivot = i;
    std::swap(aug[k], aug[pivot]);
    double d = aug[k][k];
    for (std::size_t j = 0; j < 2 * p; ++j) aug[k][j] /= d;
    for (std::size_t i = 0; i < p; ++i) {
      if (i == k) continue;
      double f = aug[i][k];
      for (std::size_t j = 0; j < 2 * p; ++j) aug[i][j] -= f * aug[k][j];
    }
  }

  Solution sol;
  sol.beta.assign(p, 0.0);
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = 0; j < p; ++j) sol.beta[i] += aug[i][p + j] * xty[j];

  double ybar = 0.0;
  for (double v : y) ybar += v;
  ybar /= static_cast<double>(n);
  double tss = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    double fit = 0.0;
    for (std::size_t j = 0; j < p; ++j) fit += cols_with_intercept[j][r] * sol.beta[j];
    sol.rss += (y[r] - fit) * (y[r] - fit);
    tss += (y[r] - ybar) * (y[r] - ybar);
  }
  sol.r2 = tss > 0.0 ? 1.0 - sol.rss / tss : 0.0;
  sol.adjusted_r2 = 1.0 - (1.0 - sol.r2) * static_cast<double>(n - 1) /
                              static_cast<double>(n - p);
  double sigma2 = sol.rss / static_cast<double>(n - p);
  sol.se.assign(p, 0.0);
  for (std::size_t i = 0; i < p; ++i) sol.se[i] = std::sqrt(sigma2 * aug[i][p + i]);
  return sol;
}

}  // namespace refols

TEST_CASE("intercept-only model recovers the mean", "[ols]") {
  DesignMatrix d;
  d.n = 3;
  auto fit = fit_ols(d, {10, 20, 30});
  CHECK(fit.intercept.coef == Approx(20.0).margin(1e-12));
  CHECK(fit.adjusted_r2 == Approx(0.0).margin(1e-12));
  CHECK(fit.intercept.se == Approx(std::sqrt(100.0 / 3.0)).epsilon(1e-12));
}

TEST_CASE("single noiseless dummy equals the group-mean difference", "[ols]") {
  DesignMatrix d;
  d.add_column("treated", {0, 0, 0, 1, 1, 1});
  auto fit = fit_ols(d, {100000, 100000, 100000, 110000, 110000, 110000});
  CHECK(fit.intercept.coef == Approx(100000.0).margin(1e-7));
  REQUIRE(fit.terms.size() == 1);
  CHECK(fit.terms[0].coef == Approx(10000.0).margin(1e-7));
  CHECK(fit.r2 == Approx(1.0).margin(1e-12));
}

TEST_CASE("random designs match the normal-equations oracle", "[ols]") {
  std::mt19937 gen(99);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::uniform_int_distribution<int> coin(0, 1);

  for (int trial = 0; trial < 8; ++trial) {
    const std::size_t n = 500;
    const std::size_t k = 10;
    std::vector<std::vector<double>> cols(k, std::vector<double>(n));
    for (auto& col : cols)
      for (auto& v : col) v = coin(gen);
    std::vector<double> y(n);
    for (std::size_t r = 0; r < n; ++r) {
      y[r] = 5.0 + noise(gen);
      for (std::size_t j = 0; j < k; ++j) y[r] += (static_cast<double>(j) - 3.0) * cols[j][r];
    }

    DesignMatrix d;
    for (std::size_t j = 0; j < k; ++j) d.add_column("c" + std::to_string(j), cols[j]);
    auto fit = fit_ols(d, y);

    std::vector<std::vector<double>> with_intercept;
    with_intercept.push_back(std::vector<double>(n, 1.0));
    for (const auto& c : cols) with_intercept.push_back(c);
    auto ref = refols::solve(with_intercept, y);

    auto rel = [](double a, double b) {
      return std::fabs(a - b) / std::max(1.0, std::fabs(b));
    };
    CHECK(rel(fit.intercept.coef, ref.beta[0]) < 1e-8);
    for (std::size_t j = 0; j < k; ++j) {
      CHECK(rel(fit.terms[j].coef, ref.beta[j + 1]) < 1e-8);
      CHECK(rel(fit.terms[j].se, ref.se[j + 1]) < 1e-6);
    }
    CHECK(fit.adjusted_r2 == Approx(ref.adjusted_r2).margin(1e-10));
    CHECK(fit.rss == Approx(ref.rss).epsilon(1e-9));
  }
}

TEST_CASE("residuals are orthogonal to the design", "[ols]") {
  std::mt19937 gen(3);
  std::normal_distribution<double> noise(0.0, 2.0);
  const std::size_t n = 200;
  std::vector<double> x1(n), x2(n), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    x1[i] = (i % 5 == 0) ? 1.0 : 0.0;
    x2[i] = (i % 3 == 0) ? 1.0 : 0.0;
    y[i] = 50.0 + 3.0 * x1[i] - 2.0 * x2[i] + noise(gen);
  }
  DesignMatrix d;
  d.add_column("x1", x1);
  d.add_column("x2", x2);
  auto fit = fit_ols(d, y);

  double scale = 0.0;
  std::vector<double> resid(n);
  for (std::size_t i = 0; i < n; ++i) {
    double pred = fit.intercept.coef + fit.terms[0].coef * x1[i] + fit.terms[1].coef * x2[i];
    resid[i] = y[i] - pred;
    scale += std::fabs(y[i]);
  }
  for (const auto& col : {x1, x2}) {
    double dot = 0.0;
    for (std::size_t i = 0; i < n; ++i) dot += col[i] * resid[i];
    CHECK(std::fabs(dot) < 1e-8 * scale);
  }
  double sum = 0.0;
  for (double r : resid) sum += r;
  CHECK(std::fabs(sum) < 1e-8 * scale);
}

TEST_CASE("constant shift moves only the intercept", "[ols]") {
  std::mt19937 gen(17);
  std::normal_distribution<double> noise(0.0, 1.0);
  const std::size_t n = 120;
  std::vector<double> x(n), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = (i % 4 == 0) ? 1.0 : 0.0;
    y[i] = 10.0 + 2.5 * x[i] + noise(gen);
  }
  DesignMatrix d;
  d.add_column("x", x);
  auto fit1 = fit_ols(d, y);
  std::vector<double> shifted = y;
  for (auto& v : shifted) v += 1234.5;
  auto fit2 = fit_ols(d, shifted);
  CHECK(fit2.intercept.coef - fit1.intercept.coef == Approx(1234.5).margin(1e-8));
  CHECK(fit2.terms[0].coef == Approx(fit1.terms[0].coef).margin(1e-8));
}

TEST_CASE("rank deficiency reports the offending column", "[ols]") {
  std::vector<double> x{1, 0, 1, 0, 1, 0, 1, 1};
  std::vector<double> y{5, 3, 6, 2, 5, 3, 7, 6};
  DesignMatrix d;
  d.add_column("first", x);
  d.add_column("duplicate", x);
  bool threw = false;
  try {
    fit_ols(d, y);
  } catch (const OlsRankError& e) {
    threw = true;
    // one of the two collinear columns must be named
    bool named = e.column() == "first" || e.column() == "duplicate";
    CHECK(named);
  }
  CHECK(threw);
}

TEST_CASE("adjusted r-squared follows the textbook formula", "[ols]") {
  std::mt19937 gen(23);
  std::normal_distribution<double> noise(0.0, 3.0);
  const std::size_t n = 80;
  std::vector<double> x(n), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = static_cast<double>(i % 7);
    y[i] = 1.0 + 0.5 * x[i] + noise(gen);
  }
  DesignMatrix d;
  d.add_column("x", x);
  auto fit = fit_ols(d, y);
  double expected = 1.0 - (1.0 - fit.r2) * static_cast<double>(n - 1) /
                              static_cast<double>(n - 2);
  CHECK(fit.adjusted_r2 == Approx(expected).margin(1e-14));
  CHECK(fit.adjusted_r2 <= fit.r2);
}

TEST_CASE("confidence intervals are symmetric about the coefficient", "[ols]") {
  DesignMatrix d;
  d.add_column("x", {0, 1, 0, 1, 0, 1, 1, 0, 1, 0});
  auto fit = fit_ols(d, {1, 3, 2, 4, 1, 5, 3, 2, 4, 1});
  for (const auto& t : fit.terms) {
    CHECK(t.ci_hi - t.coef == Approx(t.coef - t.ci_lo).margin(1e-12));
    CHECK(t.ci_hi - t.ci_lo == Approx(2 * kCi95Z * t.se).margin(1e-12));
  }
}

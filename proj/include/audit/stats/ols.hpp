#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

// Ordinary least squares by Householder QR with column pivoting. Pivoting
// exists to catch rank deficiency (an unobserved condition level, say) and
// report the offending column instead of silently dropping it.

namespace audit::stats {

class OlsRankError : public std::runtime_error {
 public:
  explicit OlsRankError(std::string column)
      : std::runtime_error("design matrix is rank deficient; unidentifiable column: " + column),
        column_(std::move(column)) {}
  const std::string& column() const { return column_; }

 private:
  std::string column_;
};

struct DesignMatrix {
  std::size_t n = 0;
  std::vector<std::string> names;
  std::vector<std::vector<double>> cols;

  void add_column(std::string name, std::vector<double> values) {
    if (n == 0) n = values.size();
    if (values.size() != n)
      throw std::invalid_argument("design column length mismatch: " + name);
    names.push_back(std::move(name));
    cols.push_back(std::move(values));
  }
};

struct OlsTerm {
  std::string name;
  double coef = 0.0;
  double se = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
};

struct OlsFit {
  std::size_t n = 0;
  std::size_t p = 0;  // columns including the intercept
  OlsTerm intercept;
  std::vector<OlsTerm> terms;  // aligned with the caller's columns
  double rss = 0.0;
  double sigma2 = 0.0;
  double r2 = 0.0;
  double adjusted_r2 = 0.0;
};

// 97.5% normal quantile, used for the 95% confidence intervals.
inline constexpr double kCi95Z = 1.959963984540054;

inline OlsFit fit_ols(const DesignMatrix& design, const std::vector<double>& y) {
  const std::size_t n = y.size();
  if (design.n != 0 && design.n != n)
    throw std::invalid_argument("fit_ols: y length does not match design");
  const std::size_t p = design.cols.size() + 1;  // + intercept
  if (n <= p)
    throw std::invalid_argument("fit_ols: need more observations than columns");

  // column-major working copy, intercept first
  std::vector<std::vector<double>> a(p, std::vector<double>(n));
  std::vector<std::string> names(p);
  names[0] = "(Intercept)";
  for (std::size_t i = 0; i < n; ++i) a[0][i] = 1.0;
  for (std::size_t j = 0; j < design.cols.size(); ++j) {
    a[j + 1] = design.cols[j];
    names[j + 1] = design.names[j];
  }
  std::vector<double> qty = y;
  std::vector<std::size_t> perm(p);
  for (std::size_t j = 0; j < p; ++j) perm[j] = j;

  auto tail_norm2 = [&](std::size_t col, std::size_t from) {
    double s = 0.0;
    for (std::size_t i = from; i < n; ++i) s += a[col][i] * a[col][i];
    return s;
  };

  double max_initial_norm = 0.0;
  for (std::size_t j = 0; j < p; ++j)
    max_initial_norm = std::max(max_initial_norm, std::sqrt(tail_norm2(j, 0)));
  const double rank_tol = 1e-10 * max_initial_norm;

  for (std::size_t k = 0; k < p; ++k) {
    // pivot: bring the column with the largest remaining mass to position k
    std::size_t best = k;
    double best_norm2 = tail_norm2(k, k);
    for (std::size_t j = k + 1; j < p; ++j) {
      double nn = tail_norm2(j, k);
      if (nn > best_norm2) {
        best_norm2 = nn;
        best = j;
      }
    }
    if (best != k) {
      std::swap(a[k], a[best]);
      std::swap(names[k], names[best]);
      std::swap(perm[k], perm[best]);
    }
    double norm = std::sqrt(best_norm2);
    if (!(norm > rank_tol)) throw OlsRankError(names[k]);

    // Householder reflector for rows k..n-1 of column k
    double x0 = a[k][k];
    double alpha = x0 >= 0.0 ? -norm : norm;
    std::vector<double> v(n - k);
    v[0] = x0 - alpha;
    for (std::size_t i = k + 1; i < n; ++i) v[i - k] = a[k][i];
    double vtv = 0.0;
    for (double vi : v) vtv += vi * vi;
    a[k][k] = alpha;
    for (std::size_t i = k + 1; i < n; ++i) a[k][i] = 0.0;
    if (vtv <= 0.0) continue;
    double beta = 2.0 / vtv;

    auto reflect = [&](std::vector<double>& col) {
      double dot = 0.0;
      for (std::size_t i = k; i < n; ++i) dot += v[i - k] * col[i];
      dot *= beta;
      for (std::size_t i = k; i < n; ++i) col[i] -= dot * v[i - k];
    };
    for (std::size_t j = k + 1; j < p; ++j) reflect(a[j]);
    reflect(qty);
  }

  // back-substitute R beta = qty[0..p)
  std::vector<double> beta_perm(p, 0.0);
  for (std::size_t kk = p; kk-- > 0;) {
    double s = qty[kk];
    for (std::size_t j = kk + 1; j < p; ++j) s -= a[j][kk] * beta_perm[j];
    beta_perm[kk] = s / a[kk][kk];
  }

  OlsFit fit;
  fit.n = n;
  fit.p = p;
  for (std::size_t i = p; i < n; ++i) fit.rss += qty[i] * qty[i];
  fit.sigma2 = fit.rss / static_cast<double>(n - p);

  double ybar = 0.0;
  for (double v : y) ybar += v;
  ybar /= static_cast<double>(n);
  double tss = 0.0;
  for (double v : y) tss += (v - ybar) * (v - ybar);
  fit.r2 = tss > 0.0 ? 1.0 - fit.rss / tss : 0.0;
  fit.adjusted_r2 = 1.0 - (1.0 - fit.r2) * static_cast<double>(n - 1) /
                              static_cast<double>(n - p);

  // diag of (X'X)^-1 = P R^-1 R^-T P'; invert the triangular factor
  std::vector<std::vector<double>> rinv(p, std::vector<double>(p, 0.0));
  for (std::size_t j = 0; j < p; ++j) {
    rinv[j][j] = 1.0 / a[j][j];
    for (std::size_t i = j; i-- > 0;) {
      double s = 0.0;
      for (std::size_t kk = i + 1; kk <= j; ++kk) s += a[kk][i] * rinv[j][kk];
      rinv[j][i] = -s / a[i][i];
    }
  }
  std::vector<double> var_perm(p, 0.0);
  for (std::size_t i = 0; i < p; ++i) {
    double s = 0.0;
    for (std::size_t j = i; j < p; ++j) s += rinv[j][i] * rinv[j][i];
    var_perm[i] = fit.sigma2 * s;
  }

  std::vector<OlsTerm> all(p);
  for (std::size_t k = 0; k < p; ++k) {
    OlsTerm t;
    t.name = names[k];
    t.coef = beta_perm[k];
    t.se = std::sqrt(std::max(0.0, var_perm[k]));
    t.ci_lo = t.coef - kCi95Z * t.se;
    t.ci_hi = t.coef + kCi95Z * t.se;
    all[perm[k]] = std::move(t);
  }
  fit.intercept = all[0];
  fit.terms.assign(all.begin() + 1, all.end());
  return fit;
}

}  // namespace audit::stats

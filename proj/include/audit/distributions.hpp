#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>

// Upper-tail probabilities for the normal and chi-squared distributions.
// Chi-squared uses the regularized incomplete gamma function, evaluated by
// series expansion for x < a+1 and by Lentz's continued fraction otherwise.

namespace audit {

inline double normal_sf(double z) {
  return 0.5 * std::erfc(z / 1.4142135623730951);
}

inline double normal_cdf(double z) { return 1.0 - normal_sf(z); }

namespace detail {

inline double gamma_series_p(double a, double x) {
  // P(a,x) by series; valid for x < a+1
  double ap = a;
  double sum = 1.0 / a;
  double del = sum;
  for (int n = 0; n < 500; ++n) {
    ap += 1.0;
    del *= x / ap;
    sum += del;
    if (std::fabs(del) < std::fabs(sum) * 1e-16) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

inline double gamma_cf_q(double a, double x) {
  // Q(a,x) by continued fraction; valid for x >= a+1
  const double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= 500; ++i) {
    double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < 1e-16) break;
  }
  return h * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

}  // namespace detail

// Regularized upper incomplete gamma Q(a,x) = Gamma(a,x)/Gamma(a).
inline double gamma_q(double a, double x) {
  if (a <= 0.0 || x < 0.0) throw std::invalid_argument("gamma_q: bad arguments");
  if (x == 0.0) return 1.0;
  if (x < a + 1.0) return 1.0 - detail::gamma_series_p(a, x);
  return detail::gamma_cf_q(a, x);
}

// Upper tail of the chi-squared distribution with df degrees of freedom.
inline double chi_squared_sf(double x, double df) {
  if (df <= 0.0) throw std::invalid_argument("chi_squared_sf: df must be positive");
  if (x <= 0.0) return 1.0;
  return gamma_q(0.5 * df, 0.5 * x);
}

}  // namespace audit

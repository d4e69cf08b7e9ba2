#include <cmath>
#include <limits>

#include "tabattack/metrics/metrics.hpp"

namespace tabattack {

namespace {

constexpr int kMaxTerms = 100000;
constexpr double kTiny = 1e-300;

// Power series, converges quickly for x < a + 1.
double gamma_p_series(double a, double x) {
  double term = 1.0 / a;
  double sum = term;
  for (int n = 1; n < kMaxTerms; ++n) {
    term *= x / (a + n);
    sum += term;
    if (std::abs(term) < std::abs(sum) * 1e-16) {
      return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
    }
  }
  throw NumericError("incomplete gamma series did not converge");
}

// Lentz continued fraction for Q(a, x), used when x >= a + 1.
double gamma_q_fraction(double a, double x) {
  double b = x + 1.0 - a;
  double c = 1.0 / kTiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < kMaxTerms; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < kTiny) d = kTiny;
    c = b + an / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < 1e-16) return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
  }
  throw NumericError("incomplete gamma continued fraction did not converge");
}

}  // namespace

double regularized_gamma_p(double a, double x) {
  if (!(a > 0.0) || x < 0.0 || std::isnan(x)) throw NumericError("regularized_gamma_p: need a > 0 and x >= 0");
  if (x == 0.0) return 0.0;
  if (std::isinf(x)) return 1.0;
  if (x < a + 1.0) return gamma_p_series(a, x);
  return 1.0 - gamma_q_fraction(a, x);
}

double chi2_cdf(double x, double k) {
  if (x <= 0.0) return 0.0;
  return regularized_gamma_p(0.5 * k, 0.5 * x);
}

double chi2_quantile(double p, double k) {
  if (!(p > 0.0 && p < 1.0)) throw NumericError("chi2_quantile: p must lie in (0, 1)");
  if (!(k >= 1.0)) throw NumericError("chi2_quantile: need at least one degree of freedom");
  double lo = 0.0;
  double hi = std::max(1.0, k);
  while (chi2_cdf(hi, k) < p) {
    lo = hi;
    hi *= 2.0;
    if (!std::isfinite(hi)) throw NumericError("chi2_quantile: could not bracket the quantile");
  }
  for (int it = 0; it < 400; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (hi - lo < 1e-12 * std::max(1.0, hi)) return mid;
    if (chi2_cdf(mid, k) < p) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  throw NumericError("chi2_quantile: bisection did not converge");
}

}  // namespace tabattack

#pragma once

// Regularized incomplete beta function and the F / Student-t distributions
// built on it.

#include <cmath>
#include <limits>
#include <string>

#include "gcl/core/error.hpp"

namespace gcl::stats {

inline double log_beta(double a, double b) {
  return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
}

namespace detail {

/// Continued fraction for I_x(a, b), modified Lentz evaluation.
inline double beta_continued_fraction(double a, double b, double x) {
  constexpr int kMaxIter = 10000;
  constexpr double kEps = 1e-16;
  constexpr double kTiny = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) return h;
  }
  throw NumericError("incomplete beta: continued fraction did not converge (a=" + std::to_string(a) +
                     ", b=" + std::to_string(b) + ", x=" + std::to_string(x) + ")");
}

inline void check_beta_args(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0)) throw Error("incomplete beta: a and b must be positive");
  if (!(x >= 0.0 && x <= 1.0)) throw Error("incomplete beta: x must lie in [0, 1]");
}

/// x^a (1-x)^b / (a B(a, b))-style prefactor without the 1/a.
inline double beta_prefactor(double a, double b, double x) {
  return std::exp(a * std::log(x) + b * std::log1p(-x) - log_beta(a, b));
}

}  // namespace detail

/// Regularized incomplete beta I_x(a, b).
inline double incomplete_beta(double a, double b, double x) {
  detail::check_beta_args(a, b, x);
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double bt = detail::beta_prefactor(a, b, x);
  if (x < (a + 1.0) / (a + b + 2.0)) return bt * detail::beta_continued_fraction(a, b, x) / a;
  return 1.0 - bt * detail::beta_continued_fraction(b, a, 1.0 - x) / b;
}

/// 1 - I_x(a, b), evaluated without cancellation in the upper tail.
inline double incomplete_beta_complement(double a, double b, double x) {
  detail::check_beta_args(a, b, x);
  if (x == 0.0) return 1.0;
  if (x == 1.0) return 0.0;
  const double bt = detail::beta_prefactor(a, b, x);
  if (x < (a + 1.0) / (a + b + 2.0)) return 1.0 - bt * detail::beta_continued_fraction(a, b, x) / a;
  return bt * detail::beta_continued_fraction(b, a, 1.0 - x) / b;
}

inline void check_df(double df, const char* what) {
  if (!(df >= 1.0) || !std::isfinite(df)) throw Error(std::string(what) + ": degrees of freedom must be >= 1");
}

/// P(T <= t) for Student's t with df degrees of freedom.
inline double t_cdf(double t, double df) {
  check_df(df, "t_cdf");
  if (std::isnan(t)) throw Error("t_cdf: t is NaN");
  if (t == 0.0) return 0.5;
  if (std::isinf(t)) return t > 0 ? 1.0 : 0.0;
  const double t2 = t * t;
  // Lower-tail mass beyond |t|.
  double tail;
  if (t2 < df)
    tail = 0.5 * incomplete_beta_complement(0.5, df / 2.0, t2 / (df + t2));
  else
    tail = 0.5 * incomplete_beta(df / 2.0, 0.5, df / (df + t2));
  return t > 0 ? 1.0 - tail : tail;
}

/// Two-sided p-value P(|T| >= |t|).
inline double t_two_sided_p(double t, double df) {
  check_df(df, "t_two_sided_p");
  if (std::isnan(t)) throw Error("t_two_sided_p: t is NaN");
  if (std::isinf(t)) return 0.0;
  const double t2 = t * t;
  if (t2 < df) return incomplete_beta_complement(0.5, df / 2.0, t2 / (df + t2));
  return incomplete_beta(df / 2.0, 0.5, df / (df + t2));
}

/// Quantile of Student's t (bisection on t_cdf, ~1e-12 accuracy).
inline double t_quantile(double p, double df) {
  check_df(df, "t_quantile");
  if (!(p > 0.0 && p < 1.0)) throw Error("t_quantile: p must lie in (0, 1)");
  if (p == 0.5) return 0.0;
  double lo = -1.0, hi = 1.0;
  while (t_cdf(lo, df) > p) lo *= 2.0;
  while (t_cdf(hi, df) < p) hi *= 2.0;
  for (int i = 0; i < 200 && hi - lo > 1e-13 * std::max(1.0, std::abs(hi)); ++i) {
    const double mid = 0.5 * (lo + hi);
    (t_cdf(mid, df) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

/// P(F <= x) for the F(d1, d2) distribution.
inline double f_cdf(double x, double d1, double d2) {
  check_df(d1, "f_cdf");
  check_df(d2, "f_cdf");
  if (!(x >= 0.0)) throw Error("f_cdf: x must be non-negative");
  if (std::isinf(x)) return 1.0;
  return incomplete_beta(d1 / 2.0, d2 / 2.0, d1 * x / (d1 * x + d2));
}

/// Upper tail P(F >= x), i.e. the p-value of an F statistic.
inline double f_sf(double x, double d1, double d2) {
  check_df(d1, "f_sf");
  check_df(d2, "f_sf");
  if (!(x >= 0.0)) throw Error("f_sf: x must be non-negative");
  if (std::isinf(x)) return 0.0;
  return incomplete_beta(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * x));
}

}  // namespace gcl::stats

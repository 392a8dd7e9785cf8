#pragma once

#include <cmath>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "gcl/core/error.hpp"
#include "gcl/stats/special.hpp"

namespace gcl::stats {

struct TTestResult {
  double t = 0.0;
  int df = 0;
  double p_two_sided = 1.0;
  double mean = 0.0;
  double stderr_ = 0.0;
};

struct SampleSummary {
  double mean = 0.0;
  double variance = 0.0;  ///< unbiased (n - 1)
  std::size_t n = 0;
};

inline SampleSummary summarize(std::span<const double> xs) {
  SampleSummary s;
  s.n = xs.size();
  if (s.n == 0) return s;
  for (double x : xs) s.mean += x;
  s.mean /= static_cast<double>(s.n);
  double ss = 0.0;
  for (double x : xs) ss += (x - s.mean) * (x - s.mean);
  s.variance = s.n > 1 ? ss / static_cast<double>(s.n - 1) : 0.0;
  return s;
}

/// One-sample Student t-test of H0: mean == mu0.
inline TTestResult t_test_one_sample(std::span<const double> xs, double mu0) {
  if (xs.size() < 2) throw Error("t-test: need at least two observations");
  const auto s = summarize(xs);
  if (!(s.variance > 0.0)) throw NumericError("t-test: sample has zero variance");
  TTestResult r;
  r.mean = s.mean;
  r.df = static_cast<int>(s.n - 1);
  r.stderr_ = std::sqrt(s.variance / static_cast<double>(s.n));
  r.t = (s.mean - mu0) / r.stderr_;
  r.p_two_sided = t_two_sided_p(r.t, r.df);
  return r;
}

struct Interval {
  double estimate = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  bool defined = true;

  bool contains(double v) const { return defined && lo <= v && v <= hi; }
  bool excludes(double v) const { return defined && (v < lo || v > hi); }
};

/// Student-t confidence interval for the mean; undefined for n < 2.
inline Interval t_interval(std::span<const double> xs, double confidence = 0.95) {
  const auto s = summarize(xs);
  Interval iv;
  iv.estimate = s.mean;
  if (s.n < 2) {
    iv.defined = false;
    iv.lo = iv.hi = s.mean;
    return iv;
  }
  const double q = t_quantile(0.5 + confidence / 2.0, static_cast<double>(s.n - 1));
  const double half = q * std::sqrt(s.variance / static_cast<double>(s.n));
  iv.lo = s.mean - half;
  iv.hi = s.mean + half;
  return iv;
}

inline nlohmann::json to_json(const TTestResult& r) {
  return {{"t", r.t}, {"df", r.df}, {"p_two_sided", r.p_two_sided}, {"mean", r.mean}, {"stderr", r.stderr_}};
}

inline nlohmann::json to_json(const Interval& iv) {
  return {{"estimate", iv.estimate}, {"lo", iv.lo}, {"hi", iv.hi}, {"defined", iv.defined}};
}

}  // namespace gcl::stats

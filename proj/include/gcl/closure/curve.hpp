#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "gcl/closure/records.hpp"
#include "gcl/core/error.hpp"
#include "gcl/core/rng.hpp"
#include "gcl/stats/ttest.hpp"
#include "gcl/stimulus/spec.hpp"

namespace gcl::closure {

enum class CiMethod { Bootstrap, TInterval };

struct CiOptions {
  CiMethod method = CiMethod::Bootstrap;
  int resamples = 1000;
  std::uint64_t seed = 0;
  double confidence = 0.95;
};

struct CurvePoint {
  int edge_length = 0;
  double mean = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  std::size_t n = 0;
  /// Fewer than two records: the interval is undefined and lo = hi = mean.
  bool ci_defined = true;
  /// Mean outside [-1, 1]; reported, not clamped.
  bool out_of_range = false;

  double half_width() const { return 0.5 * (ci_hi - ci_lo); }
};

struct ClosureCurve {
  std::string model_id;
  std::string layer;
  std::vector<CurvePoint> points;  ///< one per edge length, ascending

  const CurvePoint& at(int edge_length) const {
    for (const auto& p : points)
      if (p.edge_length == edge_length) return p;
    throw Error("curve has no edge length " + std::to_string(edge_length));
  }
};

/// Linear-interpolated sample quantile (sorted input).
inline double quantile_sorted(const std::vector<double>& xs, double q) {
  if (xs.empty()) throw Error("quantile of empty sample");
  const double pos = q * static_cast<double>(xs.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, xs.size() - 1);
  return xs[lo] + (pos - static_cast<double>(lo)) * (xs[hi] - xs[lo]);
}

inline double mean_of(const std::vector<double>& xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

/// Percentile bootstrap interval of the mean.
inline std::pair<double, double> bootstrap_mean_ci(const std::vector<double>& xs, int resamples,
                                                   std::uint64_t seed, double confidence) {
  Engine eng = make_engine(seed);
  std::vector<double> means(static_cast<std::size_t>(resamples));
  for (auto& m : means) {
    double s = 0.0;
    for (std::size_t k = 0; k < xs.size(); ++k) s += xs[uniform_index(eng, xs.size())];
    m = s / static_cast<double>(xs.size());
  }
  std::sort(means.begin(), means.end());
  const double alpha = 1.0 - confidence;
  return {quantile_sorted(means, alpha / 2.0), quantile_sorted(means, 1.0 - alpha / 2.0)};
}

/// Mean closure per edge length with a 95% interval. Records must belong to
/// one model and layer and cover all six edge lengths.
inline ClosureCurve closure_curve(const std::vector<ClosureRecord>& records, const CiOptions& ci = {}) {
  if (records.empty()) throw Error("closure_curve: no records");
  ClosureCurve curve;
  curve.model_id = records.front().model_id;
  curve.layer = records.front().layer;
  std::map<int, std::vector<std::pair<std::size_t, double>>> groups;
  for (const auto& r : records) {
    if (r.model_id != curve.model_id || r.layer != curve.layer)
      throw Error("closure_curve: records mix models or layers (" + curve.model_id + "/" + curve.layer +
                  " vs " + r.model_id + "/" + r.layer + ")");
    groups[r.edge_length].push_back({r.triple_index, r.c});
  }
  for (const auto& [edge, _] : groups) stimulus::detail::level_index(stimulus::kEdgeLengths, edge);
  for (int edge : stimulus::kEdgeLengths) {
    auto it = groups.find(edge);
    if (it == groups.end())
      throw Error("closure_curve: no records at edge length " + std::to_string(edge) + " for " +
                  curve.model_id + "/" + curve.layer);
    // Sorting by triple makes the result independent of record order.
    auto g = it->second;
    std::sort(g.begin(), g.end());
    std::vector<double> xs;
    for (const auto& [_, v] : g) xs.push_back(v);
    CurvePoint p;
    p.edge_length = edge;
    p.n = xs.size();
    p.mean = mean_of(xs);
    p.out_of_range = p.mean < -1.0 || p.mean > 1.0;
    if (p.n < 2) {
      p.ci_defined = false;
      p.ci_lo = p.ci_hi = p.mean;
    } else if (ci.method == CiMethod::Bootstrap) {
      std::tie(p.ci_lo, p.ci_hi) = bootstrap_mean_ci(
          xs, ci.resamples, derive_seed(ci.seed, {static_cast<std::uint64_t>(edge)}), ci.confidence);
    } else {
      const auto iv = stats::t_interval(xs, ci.confidence);
      p.ci_lo = iv.lo;
      p.ci_hi = iv.hi;
    }
    if (p.out_of_range)
      std::cerr << "warning: " << curve.model_id << "/" << curve.layer << ": mean closure " << p.mean
                << " at edge length " << edge << " is outside [-1, 1]\n";
    curve.points.push_back(p);
  }
  return curve;
}

/// Splits records by (model_id, layer), keeping first-seen order.
inline std::vector<std::vector<ClosureRecord>> group_records(const std::vector<ClosureRecord>& records) {
  std::vector<std::vector<ClosureRecord>> out;
  std::map<std::pair<std::string, std::string>, std::size_t> slot;
  for (const auto& r : records) {
    auto [it, fresh] = slot.try_emplace({r.model_id, r.layer}, out.size());
    if (fresh) out.emplace_back();
    out[it->second].push_back(r);
  }
  return out;
}

inline std::vector<ClosureCurve> closure_curves(const std::vector<ClosureRecord>& records,
                                                const CiOptions& ci = {}) {
  std::vector<ClosureCurve> out;
  for (const auto& g : group_records(records)) out.push_back(closure_curve(g, ci));
  return out;
}

/// Pools several models' records at one layer into a curve labelled
/// `label` (replications of one condition).
inline ClosureCurve pooled_curve(std::vector<ClosureRecord> records, const std::string& label,
                                 const CiOptions& ci = {}) {
  // Replicates reuse triple indices; offset them so sorting keeps every record.
  std::map<std::string, std::size_t> model_slot;
  for (auto& r : records) {
    auto [it, _] = model_slot.try_emplace(r.model_id, model_slot.size());
    r.triple_index += it->second * stimulus::kDisorderedCount;
    r.model_id = label;
  }
  return closure_curve(records, ci);
}

// ---------------------------------------------------------------------------
// Slope of closure against edge length

struct SlopeEstimate {
  double slope = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  std::size_t n = 0;
  bool ci_defined = true;

  bool excludes_zero() const { return ci_defined && (lo > 0.0 || hi < 0.0); }
  bool includes_zero() const { return ci_defined && lo <= 0.0 && hi >= 0.0; }
};

/// Ordinary least-squares slope of y on x.
inline double ols_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw Error("ols_slope: need two or more paired values");
  const double mx = mean_of(x), my = mean_of(y);
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  if (sxx == 0.0) throw Error("ols_slope: x has no spread");
  return sxy / sxx;
}

inline std::vector<ClosureRecord> sorted_records(std::vector<ClosureRecord> records) {
  std::sort(records.begin(), records.end(), [](const ClosureRecord& a, const ClosureRecord& b) {
    return std::tie(a.model_id, a.layer, a.triple_index) < std::tie(b.model_id, b.layer, b.triple_index);
  });
  return records;
}

/// Slope of C on edge length over the records, with a percentile bootstrap
/// interval from resampling records (triples).
inline SlopeEstimate bootstrap_slope(const std::vector<ClosureRecord>& records, int resamples = 1000,
                                     std::uint64_t seed = 0, double confidence = 0.95) {
  const auto sorted = sorted_records(records);
  std::vector<double> x, y;
  for (const auto& r : sorted) {
    x.push_back(r.edge_length);
    y.push_back(r.c);
  }
  SlopeEstimate est;
  est.n = x.size();
  est.slope = ols_slope(x, y);
  Engine eng = make_engine(derive_seed(seed, {0x510E}));
  std::vector<double> slopes;
  slopes.reserve(static_cast<std::size_t>(resamples));
  std::vector<double> bx(x.size()), by(y.size());
  for (int b = 0; b < resamples; ++b) {
    for (std::size_t k = 0; k < x.size(); ++k) {
      const auto j = uniform_index(eng, x.size());
      bx[k] = x[j];
      by[k] = y[j];
    }
    const double mx = mean_of(bx);
    double sxx = 0.0;
    for (double v : bx) sxx += (v - mx) * (v - mx);
    if (sxx == 0.0) continue;
    slopes.push_back(ols_slope(bx, by));
  }
  if (slopes.size() < 2) {
    est.ci_defined = false;
    est.lo = est.hi = est.slope;
    return est;
  }
  std::sort(slopes.begin(), slopes.end());
  const double alpha = 1.0 - confidence;
  est.lo = quantile_sorted(slopes, alpha / 2.0);
  est.hi = quantile_sorted(slopes, 1.0 - alpha / 2.0);
  return est;
}

/// Slope per replication, then a Student-t interval over replications.
inline SlopeEstimate replication_slope(const std::vector<ClosureRecord>& records, double confidence = 0.95) {
  std::vector<double> slopes;
  for (const auto& g : group_records(records)) {
    std::vector<double> x, y;
    for (const auto& r : sorted_records(g)) {
      x.push_back(r.edge_length);
      y.push_back(r.c);
    }
    slopes.push_back(ols_slope(x, y));
  }
  const auto iv = stats::t_interval(slopes, confidence);
  return {iv.estimate, iv.lo, iv.hi, slopes.size(), iv.defined};
}

inline const char* to_string(CiMethod m) { return m == CiMethod::Bootstrap ? "bootstrap" : "t"; }

inline CiMethod parse_ci_method(const std::string& s) {
  if (s == "bootstrap") return CiMethod::Bootstrap;
  if (s == "t" || s == "t-interval") return CiMethod::TInterval;
  throw Error("unknown CI method '" + s + "' (expected bootstrap or t)");
}

}  // namespace gcl::closure

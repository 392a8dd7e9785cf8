#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gcl/core/error.hpp"
#include "gcl/stats/special.hpp"

namespace gcl::stats {

struct AnovaObservation {
  std::size_t a = 0;  ///< level of the first factor (model / condition)
  std::size_t b = 0;  ///< level of the second factor (edge length)
  double y = 0.0;
};

struct AnovaEffect {
  double df1 = 0, df2 = 0, ss = 0, ms = 0, f = 0, p = 0;
};

struct AnovaTable {
  AnovaEffect a;            ///< main effect of the first factor
  AnovaEffect b;            ///< main effect of the second factor
  AnovaEffect interaction;  ///< a x b
  double residual_df = 0, residual_ss = 0, residual_ms = 0;
  double total_ss = 0;
  std::size_t n = 0;
  std::size_t levels_a = 0, levels_b = 0, per_cell = 0;
  /// Set when the residual variance is zero; F and p are then undefined (NaN).
  bool degenerate = false;
};

/// Fixed-effects two-way ANOVA with replicates on a balanced design.
/// Unbalanced designs are rejected.
inline AnovaTable anova_two_way(const std::vector<AnovaObservation>& obs) {
  if (obs.empty()) throw Error("anova: no observations");
  std::size_t la = 0, lb = 0;
  for (const auto& o : obs) {
    if (!std::isfinite(o.y)) throw Error("anova: non-finite observation");
    la = std::max(la, o.a + 1);
    lb = std::max(lb, o.b + 1);
  }
  std::vector<double> cell_sum(la * lb, 0.0);
  std::vector<std::size_t> cell_n(la * lb, 0);
  for (const auto& o : obs) {
    cell_sum[o.a * lb + o.b] += o.y;
    ++cell_n[o.a * lb + o.b];
  }
  if (la < 2 || lb < 2) throw Error("anova: each factor needs at least two levels");
  const std::size_t r = cell_n[0];
  for (std::size_t c = 0; c < cell_n.size(); ++c) {
    if (cell_n[c] == 0)
      throw Error("anova: empty cell (" + std::to_string(c / lb) + "," + std::to_string(c % lb) + ")");
    if (cell_n[c] != r) throw Error("anova: unbalanced design (cell sizes differ)");
  }

  const double n = static_cast<double>(obs.size());
  double grand = 0.0;
  for (double s : cell_sum) grand += s;
  grand /= n;

  std::vector<double> mean_a(la, 0.0), mean_b(lb, 0.0), cell_mean(la * lb);
  for (std::size_t i = 0; i < la; ++i)
    for (std::size_t j = 0; j < lb; ++j) {
      cell_mean[i * lb + j] = cell_sum[i * lb + j] / static_cast<double>(r);
      mean_a[i] += cell_mean[i * lb + j] / static_cast<double>(lb);
      mean_b[j] += cell_mean[i * lb + j] / static_cast<double>(la);
    }

  AnovaTable t;
  t.n = obs.size();
  t.levels_a = la;
  t.levels_b = lb;
  t.per_cell = r;
  const double rd = static_cast<double>(r);
  for (std::size_t i = 0; i < la; ++i) t.a.ss += rd * lb * (mean_a[i] - grand) * (mean_a[i] - grand);
  for (std::size_t j = 0; j < lb; ++j) t.b.ss += rd * la * (mean_b[j] - grand) * (mean_b[j] - grand);
  for (std::size_t i = 0; i < la; ++i)
    for (std::size_t j = 0; j < lb; ++j) {
      const double e = cell_mean[i * lb + j] - mean_a[i] - mean_b[j] + grand;
      t.interaction.ss += rd * e * e;
    }
  for (const auto& o : obs) {
    const double e = o.y - cell_mean[o.a * lb + o.b];
    t.residual_ss += e * e;
    t.total_ss += (o.y - grand) * (o.y - grand);
  }

  t.residual_df = n - static_cast<double>(la * lb);
  if (t.residual_df < 1) throw Error("anova: need more than one observation per cell");
  t.residual_ms = t.residual_ss / t.residual_df;
  t.a.df1 = static_cast<double>(la - 1);
  t.b.df1 = static_cast<double>(lb - 1);
  t.interaction.df1 = static_cast<double>((la - 1) * (lb - 1));
  // Relative to the spread of the data, a residual this small is round-off.
  t.degenerate = t.residual_ss <= 1e-24 * std::max(1.0, t.total_ss);
  for (AnovaEffect* e : {&t.a, &t.b, &t.interaction}) {
    e->df2 = t.residual_df;
    e->ms = e->ss / e->df1;
    if (t.degenerate) {
      e->f = std::numeric_limits<double>::quiet_NaN();
      e->p = std::numeric_limits<double>::quiet_NaN();
    } else {
      e->f = e->ms / t.residual_ms;
      e->p = f_sf(e->f, e->df1, e->df2);
    }
  }
  return t;
}

inline nlohmann::json to_json(const AnovaEffect& e) {
  auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  return {{"df1", e.df1}, {"df2", e.df2}, {"ss", e.ss}, {"ms", e.ms}, {"F", num(e.f)}, {"p", num(e.p)}};
}

inline nlohmann::json to_json(const AnovaTable& t, const std::string& a_name = "model",
                              const std::string& b_name = "edge_length") {
  return {{a_name, to_json(t.a)},
          {b_name, to_json(t.b)},
          {"interaction", to_json(t.interaction)},
          {"residual", {{"df", t.residual_df}, {"ss", t.residual_ss}, {"ms", t.residual_ms}}},
          {"total_ss", t.total_ss},
          {"n", t.n},
          {"per_cell", t.per_cell},
          {"degenerate", t.degenerate}};
}

}  // namespace gcl::stats

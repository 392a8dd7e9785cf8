#pragma once

// Statistics and verdicts of an experiment, computed only from persisted
// closure records and model summaries so they can be re-derived from the
// output directory alone.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gcl/closure/curve.hpp"
#include "gcl/closure/records.hpp"
#include "gcl/core/csv.hpp"
#include "gcl/experiments/plan.hpp"
#include "gcl/stats/anova.hpp"
#include "gcl/stats/ttest.hpp"
#include "gcl/stimulus/spec.hpp"

namespace gcl::experiments {

inline constexpr const char* kPenultimate = "fc_finale";

struct ModelSummary {
  std::string model_id;
  std::string condition;
  int replicate = 0;
  std::uint64_t seed = 0;
  int epochs = 0;
  bool early_stopped = false;
  double train_accuracy = 0.0;
  std::optional<double> val_accuracy;
  /// Conv-vs-FC only: "yes"/"no" for FC nets, empty elsewhere.
  std::string matched;
};

inline constexpr const char* kModelsHeader =
    "model_id,condition,replicate,seed,epochs,early_stopped,train_acc,val_acc,matched";

inline void write_models_csv(const std::filesystem::path& path, const std::vector<ModelSummary>& models) {
  csv::Writer w(path, kModelsHeader);
  for (const auto& m : models)
    w.row(m.model_id, m.condition, m.replicate, m.seed, m.epochs, m.early_stopped ? 1 : 0,
          m.train_accuracy, m.val_accuracy ? csv::format_double(*m.val_accuracy) : std::string(),
          m.matched);
  w.close();
}

inline std::vector<ModelSummary> read_models_csv(const std::filesystem::path& path) {
  const auto t = csv::read(path, kModelsHeader);
  std::vector<ModelSummary> out;
  for (const auto& row : t.rows) {
    ModelSummary m;
    m.model_id = row[0];
    m.condition = row[1];
    m.replicate = static_cast<int>(csv::to_long(row[2], t));
    m.seed = std::stoull(row[3]);
    m.epochs = static_cast<int>(csv::to_long(row[4], t));
    m.early_stopped = csv::to_long(row[5], t) != 0;
    m.train_accuracy = csv::to_double(row[6], t);
    if (!row[7].empty()) m.val_accuracy = csv::to_double(row[7], t);
    m.matched = row[8];
    out.push_back(std::move(m));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Curve signatures

inline bool strictly_increasing(const closure::ClosureCurve& c) {
  for (std::size_t i = 1; i < c.points.size(); ++i)
    if (!(c.points[i].mean > c.points[i - 1].mean)) return false;
  return true;
}

inline double max_abs_mean(const closure::ClosureCurve& c) {
  double m = 0.0;
  for (const auto& p : c.points) m = std::max(m, std::abs(p.mean));
  return m;
}

/// Rise of the curve from the shortest to the longest edge length.
inline double rise(const closure::ClosureCurve& c) { return c.points.back().mean - c.points.front().mean; }

/// "closure" for a strictly increasing curve that is not flat, "no-closure"
/// for a flat one (max |mean| below tau), otherwise "indeterminate".
inline std::string curve_signature(const closure::ClosureCurve& c, double tau) {
  if (max_abs_mean(c) < tau) return "no-closure";
  if (strictly_increasing(c)) return "closure";
  return "indeterminate";
}

inline nlohmann::json curve_json(const closure::ClosureCurve& c) {
  nlohmann::json pts = nlohmann::json::array();
  for (const auto& p : c.points) {
    nlohmann::json e{{"edge_length", p.edge_length}, {"mean", p.mean}, {"n", p.n}};
    if (p.ci_defined) {
      e["ci_lo"] = p.ci_lo;
      e["ci_hi"] = p.ci_hi;
    } else {
      e["ci_lo"] = nullptr;
      e["ci_hi"] = nullptr;
    }
    pts.push_back(e);
  }
  return pts;
}

inline nlohmann::json slope_json(const closure::SlopeEstimate& s, const std::string& method) {
  return {{"slope", s.slope},     {"ci_lo", s.lo},
          {"ci_hi", s.hi},        {"n", s.n},
          {"method", method},     {"ci_defined", s.ci_defined},
          {"excludes_zero", s.excludes_zero()}};
}

// ---------------------------------------------------------------------------

struct Analysis {
  std::vector<closure::ClosureCurve> curves;  ///< per model, then pooled per condition
  nlohmann::json stats;
  nlohmann::json verdict;
};

namespace detail {

inline std::vector<closure::ClosureRecord> select(const std::vector<closure::ClosureRecord>& records,
                                                  const std::map<std::string, std::string>& condition_of,
                                                  const std::string& condition, const std::string& layer) {
  std::vector<closure::ClosureRecord> out;
  for (const auto& r : records) {
    auto it = condition_of.find(r.model_id);
    if (it == condition_of.end()) throw Error("records mention unknown model '" + r.model_id + "'");
    if (it->second == condition && r.layer == layer) out.push_back(r);
  }
  if (out.empty()) throw Error("no closure records for condition '" + condition + "' at layer '" + layer + "'");
  return out;
}

inline nlohmann::json anova_over(const std::vector<std::vector<closure::ClosureRecord>>& groups,
                                 const std::vector<std::string>& names) {
  std::vector<stats::AnovaObservation> obs;
  for (std::size_t a = 0; a < groups.size(); ++a)
    for (const auto& r : groups[a])
      obs.push_back({a, stimulus::detail::level_index(stimulus::kEdgeLengths, r.edge_length), r.c});
  try {
    auto j = stats::to_json(stats::anova_two_way(obs), "condition", "edge_length");
    j["levels"] = names;
    return j;
  } catch (const Error& e) {
    return {{"error", e.what()}, {"levels", names}};
  }
}

inline nlohmann::json ttest_over(const std::vector<closure::ClosureRecord>& recs) {
  std::vector<double> xs;
  for (const auto& r : recs) xs.push_back(r.c);
  try {
    return stats::to_json(stats::t_test_one_sample(xs, 0.0));
  } catch (const Error& e) {
    return {{"error", e.what()}, {"mean", stats::summarize(xs).mean}, {"df", static_cast<int>(xs.size()) - 1}};
  }
}

inline double pooled_mean(const std::vector<closure::ClosureRecord>& recs) {
  double s = 0.0;
  for (const auto& r : recs) s += r.c;
  return s / static_cast<double>(recs.size());
}

inline std::vector<std::string> layers_in(const std::vector<closure::ClosureRecord>& records) {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& r : records)
    if (seen.insert(r.layer).second) out.push_back(r.layer);
  return out;
}

inline std::string verdict_layer(const std::vector<closure::ClosureRecord>& records) {
  const auto layers = layers_in(records);
  if (std::find(layers.begin(), layers.end(), kPenultimate) != layers.end()) return kPenultimate;
  return layers.back();
}

inline std::string slope_signature(const closure::SlopeEstimate& s) {
  return s.excludes_zero() && s.slope > 0.0 ? "closure" : "no-closure";
}

}  // namespace detail

/// Curves, statistics and verdict for an experiment.
inline Analysis analyze(const ExperimentPlan& plan, const std::vector<closure::ClosureRecord>& records,
                        const std::vector<ModelSummary>& models) {
  if (records.empty()) throw Error("analyze: no closure records");
  std::map<std::string, std::string> condition_of;
  std::vector<std::string> conditions;
  for (const auto& m : models) {
    condition_of[m.model_id] = m.condition;
    if (std::find(conditions.begin(), conditions.end(), m.condition) == conditions.end())
      conditions.push_back(m.condition);
  }

  Analysis a;
  a.curves = closure::closure_curves(records, plan.ci);
  const auto layers = detail::layers_in(records);
  std::map<std::pair<std::string, std::string>, closure::ClosureCurve> pooled;
  for (const auto& cond : conditions)
    for (const auto& layer : layers) {
      std::vector<closure::ClosureRecord> recs;
      for (const auto& r : records) {
        const auto it = condition_of.find(r.model_id);
        if (it == condition_of.end()) throw Error("records mention unknown model '" + r.model_id + "'");
        if (it->second == cond && r.layer == layer) recs.push_back(r);
      }
      if (recs.empty()) continue;
      auto c = closure::pooled_curve(recs, cond, plan.ci);
      pooled.emplace(std::make_pair(cond, layer), c);
      a.curves.push_back(std::move(c));
    }

  const double tau = plan.flatness_threshold;
  const std::string layer = detail::verdict_layer(records);
  nlohmann::json& v = a.verdict;
  nlohmann::json& st = a.stats;
  v["experiment"] = plan.name;
  v["kind"] = std::string(to_string(plan.kind));
  v["layer"] = layer;
  v["flatness_threshold"] = tau;
  v["alpha"] = plan.alpha;
  st["n_records"] = records.size();

  auto curve_block = [&](const std::string& cond, const std::string& lay) {
    const auto it = pooled.find({cond, lay});
    if (it == pooled.end()) throw Error("no closure records for condition '" + cond + "' at layer '" + lay + "'");
    const auto& c = it->second;
    return nlohmann::json{{"curve", curve_json(c)},
                          {"strictly_increasing", strictly_increasing(c)},
                          {"rise", rise(c)},
                          {"max_abs_mean", max_abs_mean(c)},
                          {"signature", curve_signature(c, tau)}};
  };

  switch (plan.kind) {
    case ExperimentKind::SanityCD_BD: {
      nlohmann::json invalid = nlohmann::json::array();
      for (const auto& m : models)
        if (!m.val_accuracy || *m.val_accuracy < 1.0) invalid.push_back(m.model_id);
      v["valid"] = invalid.empty();
      v["invalid_models"] = invalid;
      for (const auto& cond : {"CD", "BD"}) v["conditions"][cond] = curve_block(cond, layer);
      const auto cd = detail::select(records, condition_of, "CD", layer);
      const auto bd = detail::select(records, condition_of, "BD", layer);
      st["anova"] = detail::anova_over({cd, bd}, {"CD", "BD"});
      st["ttest"]["CD"] = detail::ttest_over(cd);
      st["ttest"]["BD"] = detail::ttest_over(bd);
      v["CD"] = v["conditions"]["CD"]["signature"];
      v["BD"] = v["conditions"]["BD"]["signature"];
      v["pass"] = invalid.empty() && v["CD"] == "closure" && v["BD"] == "no-closure";
      break;
    }
    case ExperimentKind::WhiteNoise:
    case ExperimentKind::ShuffledPixels:
    case ExperimentKind::Untrained:
    case ExperimentKind::ShuffledLabels: {
      const auto abl = ablation_condition(plan.kind);
      const auto nat = detail::select(records, condition_of, "natural", layer);
      const auto ab = detail::select(records, condition_of, abl, layer);
      const auto slope = closure::bootstrap_slope(nat, plan.ci.resamples, plan.ci.seed, plan.ci.confidence);
      st["anova"] = detail::anova_over({nat, ab}, {"natural", abl});
      st["ttest"]["natural"] = detail::ttest_over(nat);
      st["ttest"][abl] = detail::ttest_over(ab);
      st["slope"]["natural"] = slope_json(slope, "bootstrap");
      st["slope"][abl] = slope_json(
          closure::bootstrap_slope(ab, plan.ci.resamples, plan.ci.seed, plan.ci.confidence), "bootstrap");
      const double nat_mean = detail::pooled_mean(nat), ab_mean = detail::pooled_mean(ab);
      v["conditions"]["natural"] = curve_block("natural", layer);
      v["conditions"]["natural"]["pooled_mean"] = nat_mean;
      v["conditions"]["natural"]["slope_positive"] = slope.excludes_zero() && slope.slope > 0.0;
      v["conditions"][abl] = curve_block(abl, layer);
      v["conditions"][abl]["pooled_mean"] = ab_mean;
      const auto& an = st["anova"];
      const bool interaction = an.contains("interaction") && an["interaction"]["p"].is_number() &&
                               an["interaction"]["p"].get<double>() < plan.alpha;
      const auto& tt = st["ttest"][abl];
      const bool positive = ab_mean > 0.0 && tt.contains("p_two_sided") &&
                            tt["p_two_sided"].get<double>() < plan.alpha;
      v["interaction_significant"] = interaction;
      v["ablation_flat"] = max_abs_mean(pooled.at({abl, layer})) < tau;
      v["ablation_positive"] = positive;
      v["ablation_weaker"] = ab_mean < nat_mean;
      v["natural_slope_positive"] = v["conditions"]["natural"]["slope_positive"];
      bool pattern = false;
      if (plan.kind == ExperimentKind::WhiteNoise || plan.kind == ExperimentKind::ShuffledPixels)
        pattern = v["ablation_flat"].get<bool>() && interaction;
      else
        pattern = positive && ab_mean < nat_mean;
      v["pattern"] = pattern;
      v["pass"] = pattern && v["natural_slope_positive"].get<bool>();
      break;
    }
    case ExperimentKind::ConvVsFC: {
      nlohmann::json unmatched = nlohmann::json::array();
      for (const auto& m : models)
        if (m.condition == "fc" && m.matched != "yes") unmatched.push_back(m.model_id);
      const auto conv = detail::select(records, condition_of, "conv", layer);
      const auto fc = detail::select(records, condition_of, "fc", layer);
      const auto sc = closure::replication_slope(conv, plan.ci.confidence);
      const auto sf = closure::replication_slope(fc, plan.ci.confidence);
      st["slope"]["conv"] = slope_json(sc, "t-over-replications");
      st["slope"]["fc"] = slope_json(sf, "t-over-replications");
      st["anova"] = detail::anova_over({conv, fc}, {"conv", "fc"});
      v["conditions"]["conv"] = curve_block("conv", layer);
      v["conditions"]["fc"] = curve_block("fc", layer);
      v["matched"] = unmatched.empty();
      v["unmatched_models"] = unmatched;
      v["conv_slope_excludes_zero"] = sc.excludes_zero() && sc.slope > 0.0;
      v["fc_slope_includes_zero"] = sf.includes_zero();
      v["conv"] = detail::slope_signature(sc);
      v["fc"] = detail::slope_signature(sf);
      v["status"] = unmatched.empty() ? "conclusive" : "inconclusive";
      v["pass"] = unmatched.empty() && v["conv_slope_excludes_zero"].get<bool>() &&
                  v["fc_slope_includes_zero"].get<bool>();
      break;
    }
    case ExperimentKind::LayerWise: {
      const std::string cond = conditions.front();
      for (const auto& lay : layers) {
        const auto recs = detail::select(records, condition_of, cond, lay);
        const auto s = closure::bootstrap_slope(recs, plan.ci.resamples, plan.ci.seed, plan.ci.confidence);
        st["slope"][lay] = slope_json(s, "bootstrap");
        auto block = curve_block(cond, lay);
        block["slope_signature"] = detail::slope_signature(s);
        v["layers"][lay] = block;
      }
      v["layer_order"] = layers;
      const bool has_first = v["layers"].contains("conv2d_1"), has_last = v["layers"].contains(kPenultimate);
      if (has_first && has_last) {
        v["pass"] = v["layers"][kPenultimate]["slope_signature"] == "closure" &&
                    v["layers"]["conv2d_1"]["slope_signature"] == "no-closure";
      } else {
        v["pass"] = nullptr;
      }
      break;
    }
  }
  return a;
}

}  // namespace gcl::experiments

#pragma once

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "gcl/closure/curve.hpp"
#include "gcl/core/config.hpp"
#include "gcl/nn/checkpoint.hpp"
#include "gcl/nn/config.hpp"
#include "gcl/training/dataset.hpp"
#include "gcl/training/trainer.hpp"

namespace gcl::experiments {

enum class ExperimentKind {
  SanityCD_BD,
  WhiteNoise,
  ShuffledPixels,
  Untrained,
  ShuffledLabels,
  ConvVsFC,
  LayerWise
};

inline constexpr std::array<ExperimentKind, 7> kExperimentKinds{
    ExperimentKind::SanityCD_BD,    ExperimentKind::WhiteNoise, ExperimentKind::ShuffledPixels,
    ExperimentKind::Untrained,      ExperimentKind::ShuffledLabels, ExperimentKind::ConvVsFC,
    ExperimentKind::LayerWise};

inline std::string_view to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::SanityCD_BD: return "SanityCD_BD";
    case ExperimentKind::WhiteNoise: return "WhiteNoise";
    case ExperimentKind::ShuffledPixels: return "ShuffledPixels";
    case ExperimentKind::Untrained: return "Untrained";
    case ExperimentKind::ShuffledLabels: return "ShuffledLabels";
    case ExperimentKind::ConvVsFC: return "ConvVsFC";
    case ExperimentKind::LayerWise: return "LayerWise";
  }
  return "?";
}

inline ExperimentKind parse_experiment_kind(std::string_view s) {
  for (auto k : kExperimentKinds)
    if (to_string(k) == s) return k;
  std::string valid;
  for (auto k : kExperimentKinds) valid += (valid.empty() ? "" : ", ") + std::string(to_string(k));
  throw config::ConfigError("unknown experiment '" + std::string(s) + "' (valid: " + valid + ")");
}

inline bool is_ablation(ExperimentKind k) {
  return k == ExperimentKind::WhiteNoise || k == ExperimentKind::ShuffledPixels ||
         k == ExperimentKind::Untrained || k == ExperimentKind::ShuffledLabels;
}

/// Condition label used in model ids and reports for an ablation.
inline std::string ablation_condition(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::WhiteNoise: return "white_noise";
    case ExperimentKind::ShuffledPixels: return "shuffled_pixels";
    case ExperimentKind::Untrained: return "untrained";
    case ExperimentKind::ShuffledLabels: return "shuffled_labels";
    default: throw Error("not an ablation: " + std::string(to_string(k)));
  }
}

struct DataConfig {
  /// Natural-image root (root/<class>/*.png|jpg); empty means $GCL_DATA_DIR.
  std::filesystem::path root;
  std::size_t classes = 3;
  std::size_t per_class = 100;
  std::size_t image_size = 150;
  /// Seeds the choice of classes/files when more are available than needed.
  std::uint64_t selection_seed = 0;
  double val_fraction = 0.25;
  /// White-noise training set size; 0 means the natural training-split size.
  std::size_t noise_count = 0;
  training::BadFilePolicy bad_files = training::BadFilePolicy::Fail;
  /// Shuffled pixels: fresh permutation per image instead of one shared one.
  bool per_image_shuffle = false;

  std::filesystem::path resolved_root() const {
    if (!root.empty()) return root;
    if (const char* env = std::getenv("GCL_DATA_DIR"); env && *env) return env;
    throw config::ConfigError("data.root: not set and GCL_DATA_DIR is empty");
  }
};

/// Conv-vs-FC accuracy matching: the FC net trains until its validation
/// accuracy is within `tolerance` of the conv net's, trying each learning-rate
/// scale in turn.
struct MatchingConfig {
  double tolerance = 0.03;
  std::vector<double> lr_scales{1.0, 3.0, 0.3};
  int max_epochs = 100;
};

struct ExperimentPlan {
  std::string name;
  ExperimentKind kind = ExperimentKind::SanityCD_BD;
  int replications = 5;
  std::uint64_t base_seed = 0;
  std::uint64_t triple_seed = 0;
  bool strict_position = false;
  /// "f32" or "f64".
  std::string precision = "f32";
  nn::NetConfig net;
  nn::NetConfig fc_net;
  training::TrainConfig train;
  training::TrainConfig fc_train;
  /// Training of the ablated condition (white noise, shuffled pixels or
  /// labels); defaults to `train`.
  training::TrainConfig ablation_train;
  DataConfig data;
  MatchingConfig matching;
  /// Layers probed for closure; empty means the penultimate layer, ["all"]
  /// every probe layer.
  std::vector<std::string> layers;
  double flatness_threshold = 0.1;
  double alpha = 0.01;
  closure::CiOptions ci;
  int jobs = 1;
  /// Shared directory of trained models keyed by their full training
  /// description; empty disables reuse.
  std::filesystem::path model_cache;

  std::uint64_t replicate_seed(int r) const { return base_seed + static_cast<std::uint64_t>(r); }
  bool needs_natural_data() const { return kind != ExperimentKind::SanityCD_BD; }
};

/// Defaults that depend on the experiment kind.
inline ExperimentPlan default_plan(ExperimentKind kind) {
  ExperimentPlan p;
  p.kind = kind;
  p.name = std::string(to_string(kind));
  p.net = nn::NetConfig{};
  p.fc_net = nn::NetConfig{};
  p.fc_net.kind = nn::NetKind::FullyConnected;
  p.train.epochs = 100;
  p.fc_train = p.train;
  switch (kind) {
    case ExperimentKind::SanityCD_BD:
      p.replications = 5;
      p.net = nn::binary_conv_config();
      p.train.augment = false;
      p.train.stop_at_val_accuracy = 1.0;
      break;
    case ExperimentKind::ConvVsFC: p.replications = 7; break;
    case ExperimentKind::LayerWise:
      p.replications = 1;
      p.layers = {"all"};
      break;
    default: p.replications = 8; break;
  }
  p.ablation_train = p.train;
  return p;
}

namespace detail {

inline training::TrainConfig read_train(config::Fields f, training::TrainConfig c) {
  c.epochs = f.get("epochs", c.epochs);
  c.batch_size = f.get("batch_size", c.batch_size);
  if (f.has("lr")) c.lr = f.get_optional<double>("lr");
  c.rho = f.get("rho", c.rho);
  c.eps = f.get("eps", c.eps);
  c.augment = f.get("augment", c.augment);
  c.augmentation.horizontal_flip = f.get("horizontal_flip", c.augmentation.horizontal_flip);
  c.augmentation.translation_range = f.get("translation_range", c.augmentation.translation_range);
  c.augmentation.featurewise_normalization =
      f.get("featurewise_normalization", c.augmentation.featurewise_normalization);
  c.checkpoint_epochs = f.get("checkpoint_epochs", c.checkpoint_epochs);
  if (f.has("stop_at_val_accuracy")) c.stop_at_val_accuracy = f.get_optional<double>("stop_at_val_accuracy");
  if (f.has("stop_at_train_accuracy"))
    c.stop_at_train_accuracy = f.get_optional<double>("stop_at_train_accuracy");
  c.min_epochs = f.get("min_epochs", c.min_epochs);
  c.verbose = f.get("verbose", c.verbose);
  f.finish();
  if (c.epochs < 0) throw config::ConfigError(f.path("epochs") + ": must be >= 0");
  if (c.batch_size < 1) throw config::ConfigError(f.path("batch_size") + ": must be >= 1");
  if (c.lr && !(*c.lr > 0.0)) throw config::ConfigError(f.path("lr") + ": must be positive");
  try {
    training::validate(c.augmentation);
  } catch (const Error& e) {
    throw config::ConfigError(f.path("translation_range") + ": " + e.what());
  }
  return c;
}

inline DataConfig read_data(config::Fields d, DataConfig c, const std::vector<std::string>& extra_keys = {}) {
  c.root = d.get("root", c.root.string());
  c.classes = d.get("classes", c.classes);
  c.per_class = d.get("per_class", c.per_class);
  c.image_size = d.get("image_size", c.image_size);
  c.selection_seed = d.get("selection_seed", c.selection_seed);
  c.val_fraction = d.get("val_fraction", c.val_fraction);
  c.noise_count = d.get("noise_count", c.noise_count);
  const auto bad = d.get<std::string>("bad_files", c.bad_files == training::BadFilePolicy::Fail ? "fail" : "skip");
  if (bad == "fail")
    c.bad_files = training::BadFilePolicy::Fail;
  else if (bad == "skip")
    c.bad_files = training::BadFilePolicy::SkipWithWarning;
  else
    throw config::ConfigError(d.path("bad_files") + ": expected \"fail\" or \"skip\"");
  c.per_image_shuffle = d.get("per_image_shuffle", c.per_image_shuffle);
  for (const auto& k : extra_keys)
    if (d.has(k)) d.raw(k);
  d.finish();
  if (!(c.val_fraction >= 0.0 && c.val_fraction < 1.0))
    throw config::ConfigError(d.path("val_fraction") + ": must be in [0, 1)");
  if (c.classes < 2) throw config::ConfigError(d.path("classes") + ": must be >= 2");
  return c;
}

inline nlohmann::json train_json(const training::TrainConfig& c) {
  auto j = training::to_json(c);
  j.erase("seed");
  return j;
}

inline nn::NetConfig read_net(config::Fields& parent, const std::string& key, const nn::NetConfig& base) {
  if (!parent.has(key)) return base;
  const auto& j = parent.raw(key);
  try {
    return nn::net_config_from_json(j, parent.path(key), base);
  } catch (const config::ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw config::ConfigError(e.what());
  }
}

}  // namespace detail

inline ExperimentPlan plan_from_json(const nlohmann::json& j) {
  config::Fields f(j, "");
  const auto kind = [&] {
    try {
      return parse_experiment_kind(f.require<std::string>("kind"));
    } catch (const config::ConfigError& e) {
      throw config::ConfigError(std::string("kind: ") + e.what());
    }
  }();
  ExperimentPlan p = default_plan(kind);
  p.name = f.get("name", p.name);
  p.replications = f.get("replications", p.replications);
  if (p.replications < 1) throw config::ConfigError("replications: must be >= 1");
  p.base_seed = f.get("base_seed", p.base_seed);
  p.triple_seed = f.get("triple_seed", p.base_seed);
  p.strict_position = f.get("strict_position", p.strict_position);
  p.precision = f.get("precision", p.precision);
  if (p.precision != "f32" && p.precision != "f64")
    throw config::ConfigError("precision: expected \"f32\" or \"f64\"");
  p.net = detail::read_net(f, "net", p.net);
  p.fc_net = detail::read_net(f, "fc_net", p.fc_net);
  if (f.has("train")) p.train = detail::read_train(f.sub("train"), p.train);
  // The FC net keeps its own default learning rate unless fc_train sets one.
  p.fc_train = p.train;
  p.fc_train.lr.reset();
  p.ablation_train = p.train;
  if (f.has("fc_train")) p.fc_train = detail::read_train(f.sub("fc_train"), p.fc_train);
  if (f.has("ablation_train")) p.ablation_train = detail::read_train(f.sub("ablation_train"), p.ablation_train);
  if (f.has("data")) p.data = detail::read_data(f.sub("data"), p.data);
  if (f.has("matching")) {
    auto m = f.sub("matching");
    p.matching.tolerance = m.get("tolerance", p.matching.tolerance);
    p.matching.lr_scales = m.get("lr_scales", p.matching.lr_scales);
    p.matching.max_epochs = m.get("max_epochs", p.matching.max_epochs);
    m.finish();
    if (p.matching.lr_scales.empty()) throw config::ConfigError(m.path("lr_scales") + ": must not be empty");
  }
  p.layers = f.get("layers", p.layers);
  p.flatness_threshold = f.get("flatness_threshold", p.flatness_threshold);
  p.alpha = f.get("alpha", p.alpha);
  if (f.has("ci")) {
    auto c = f.sub("ci");
    try {
      p.ci.method = closure::parse_ci_method(c.get<std::string>("method", "bootstrap"));
    } catch (const config::ConfigError&) {
      throw;
    } catch (const Error& e) {
      throw config::ConfigError(c.path("method") + ": " + e.what());
    }
    p.ci.resamples = c.get("resamples", p.ci.resamples);
    p.ci.confidence = c.get("confidence", p.ci.confidence);
    c.finish();
    if (p.ci.resamples < 10) throw config::ConfigError(c.path("resamples") + ": must be >= 10");
  }
  p.ci.seed = p.base_seed;
  p.jobs = f.get("jobs", p.jobs);
  p.model_cache = f.get("model_cache", p.model_cache.string());
  f.finish();

  if (p.data.classes != static_cast<std::size_t>(p.net.n_classes) && p.needs_natural_data())
    throw config::ConfigError("net.n_classes: " + std::to_string(p.net.n_classes) +
                              " does not match data.classes " + std::to_string(p.data.classes));
  if (p.kind == ExperimentKind::SanityCD_BD && p.net.n_classes != 2)
    throw config::ConfigError("net.n_classes: the sanity check trains binary nets (2 classes)");
  if (p.kind == ExperimentKind::ConvVsFC) {
    if (p.fc_net.kind != nn::NetKind::FullyConnected)
      throw config::ConfigError("fc_net.kind: must be \"fc\"");
    if (p.fc_net.n_classes != p.net.n_classes)
      throw config::ConfigError("fc_net.n_classes: must equal net.n_classes");
  }
  if (p.net.kind != nn::NetKind::Conv && p.kind != ExperimentKind::LayerWise)
    throw config::ConfigError("net.kind: this experiment uses a conv net");
  return p;
}

inline ExperimentPlan load_plan(const std::filesystem::path& path) {
  auto j = config::load_file(path);
  // A run manifest carries the resolved plan under "config".
  if (j.is_object() && j.contains("manifest_version") && j.contains("config")) j = j["config"];
  return plan_from_json(j);
}

/// Fully resolved plan; plan_from_json(to_json(p)) reproduces p.
inline nlohmann::json to_json(const ExperimentPlan& p) {
  nlohmann::json j;
  j["name"] = p.name;
  j["kind"] = std::string(to_string(p.kind));
  j["replications"] = p.replications;
  j["base_seed"] = p.base_seed;
  j["triple_seed"] = p.triple_seed;
  j["strict_position"] = p.strict_position;
  j["precision"] = p.precision;
  j["net"] = nn::to_json(p.net);
  j["fc_net"] = nn::to_json(p.fc_net);
  j["train"] = detail::train_json(p.train);
  j["fc_train"] = detail::train_json(p.fc_train);
  j["ablation_train"] = detail::train_json(p.ablation_train);
  j["data"] = {{"root", p.data.root.string()},
               {"classes", p.data.classes},
               {"per_class", p.data.per_class},
               {"image_size", p.data.image_size},
               {"selection_seed", p.data.selection_seed},
               {"val_fraction", p.data.val_fraction},
               {"noise_count", p.data.noise_count},
               {"bad_files", p.data.bad_files == training::BadFilePolicy::Fail ? "fail" : "skip"},
               {"per_image_shuffle", p.data.per_image_shuffle}};
  j["matching"] = {{"tolerance", p.matching.tolerance},
                   {"lr_scales", p.matching.lr_scales},
                   {"max_epochs", p.matching.max_epochs}};
  j["layers"] = p.layers;
  j["flatness_threshold"] = p.flatness_threshold;
  j["alpha"] = p.alpha;
  j["ci"] = {{"method", closure::to_string(p.ci.method)},
             {"resamples", p.ci.resamples},
             {"confidence", p.ci.confidence}};
  j["jobs"] = p.jobs;
  j["model_cache"] = p.model_cache.string();
  return j;
}

}  // namespace gcl::experiments

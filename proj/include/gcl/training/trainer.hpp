#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gcl/core/error.hpp"
#include "gcl/core/hash.hpp"
#include "gcl/core/rng.hpp"
#include "gcl/nn/checkpoint.hpp"
#include "gcl/nn/network.hpp"
#include "gcl/nn/rmsprop.hpp"
#include "gcl/training/augment.hpp"
#include "gcl/training/dataset.hpp"

namespace gcl::training {

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  std::optional<double> val_accuracy;
  double seconds = 0.0;
};

struct TrainConfig {
  int epochs = 100;
  int batch_size = 32;
  /// Learning rate; unset means the architecture default.
  std::optional<double> lr;
  double rho = 0.9;
  double eps = 1e-8;
  std::uint64_t seed = 0;
  bool augment = true;
  AugmentationConfig augmentation;
  /// Epochs after which a checkpoint is written (0 = before any update).
  std::vector<int> checkpoint_epochs;
  std::filesystem::path checkpoint_dir;
  /// Stop once validation accuracy reaches this value (and min_epochs ran).
  std::optional<double> stop_at_val_accuracy;
  int min_epochs = 1;
  /// Stop once training accuracy reaches this value (degenerate sets).
  std::optional<double> stop_at_train_accuracy;
  /// Extra stopping rule checked after every epoch (subject to min_epochs).
  /// Not serialised; callers that rely on it record its parameters.
  std::function<bool(const EpochStats&)> stop_when;
  bool verbose = false;
};

inline nlohmann::json to_json(const TrainConfig& c) {
  nlohmann::json j{{"epochs", c.epochs},
                   {"batch_size", c.batch_size},
                   {"rho", c.rho},
                   {"eps", c.eps},
                   {"seed", c.seed},
                   {"augment", c.augment},
                   {"horizontal_flip", c.augmentation.horizontal_flip},
                   {"translation_range", c.augmentation.translation_range},
                   {"featurewise_normalization", c.augmentation.featurewise_normalization},
                   {"checkpoint_epochs", c.checkpoint_epochs},
                   {"min_epochs", c.min_epochs}};
  j["lr"] = c.lr ? nlohmann::json(*c.lr) : nlohmann::json(nullptr);
  j["stop_at_val_accuracy"] =
      c.stop_at_val_accuracy ? nlohmann::json(*c.stop_at_val_accuracy) : nlohmann::json(nullptr);
  j["stop_at_train_accuracy"] =
      c.stop_at_train_accuracy ? nlohmann::json(*c.stop_at_train_accuracy) : nlohmann::json(nullptr);
  return j;
}

struct TrainReport {
  std::vector<EpochStats> epochs;
  int configured_epochs = 0;
  bool early_stopped = false;
  /// False when there is no validation split (white noise) and only train
  /// accuracy is reported.
  bool has_validation = false;
  std::uint64_t seed = 0;
  std::string config_hash;
  std::vector<std::filesystem::path> checkpoints;

  std::optional<double> final_val_accuracy() const {
    return epochs.empty() ? std::nullopt : epochs.back().val_accuracy;
  }
  double final_train_accuracy() const { return epochs.empty() ? 0.0 : epochs.back().train_accuracy; }
};

/// Training aborted on a non-finite loss or gradient.
class TrainingDiverged : public NumericError {
 public:
  TrainingDiverged(const std::string& what, std::optional<std::filesystem::path> last)
      : NumericError(what), last_checkpoint(std::move(last)) {}
  std::optional<std::filesystem::path> last_checkpoint;
};

/// TrainReport as `epoch,train_loss,train_acc,val_acc` (val_acc empty when
/// there is no validation split).
inline void write_report_csv(const std::filesystem::path& path, const TrainReport& r) {
  std::ofstream out(path);
  if (!out) throw IoError(path.string(), "cannot open for writing");
  out << "epoch,train_loss,train_acc,val_acc\n";
  char buf[128];
  for (const auto& e : r.epochs) {
    std::snprintf(buf, sizeof buf, "%d,%.9g,%.9g,", e.epoch, e.train_loss, e.train_accuracy);
    out << buf;
    if (e.val_accuracy) {
      std::snprintf(buf, sizeof buf, "%.9g", *e.val_accuracy);
      out << buf;
    }
    out << '\n';
  }
  if (!out) throw IoError(path.string(), "write failed");
}

inline std::string epoch_name(int epoch) {
  char name[64];
  std::snprintf(name, sizeof name, "epoch_%03d.ckpt", epoch);
  return name;
}

/// Packs examples into an [N, H, W, C] batch.
template <class T>
Tensor<T> make_batch(const std::vector<const Image*>& images) {
  const auto& f = *images.front();
  Tensor<T> batch({images.size(), f.height, f.width, f.channels});
  const std::size_t per = f.values.size();
  for (std::size_t b = 0; b < images.size(); ++b) {
    if (!images[b]->same_shape(f)) throw Error("make_batch: mixed image shapes");
    std::copy(images[b]->values.begin(), images[b]->values.end(), batch.data() + b * per);
  }
  return batch;
}

template <class T>
Tensor<T> make_targets(const std::vector<int>& labels, const nn::NetConfig& cfg) {
  const auto units = static_cast<std::size_t>(cfg.head_units());
  Tensor<T> t({labels.size(), units});
  for (std::size_t b = 0; b < labels.size(); ++b) {
    if (cfg.head == nn::HeadKind::Sigmoid)
      t[b] = static_cast<T>(labels[b]);
    else
      t[b * units + static_cast<std::size_t>(labels[b])] = T(1);
  }
  return t;
}

template <class T>
int predicted_label(std::span<const T> head, nn::HeadKind kind) {
  if (kind == nn::HeadKind::Sigmoid) return head[0] >= T(0.5) ? 1 : 0;
  return static_cast<int>(std::max_element(head.begin(), head.end()) - head.begin());
}

/// Classification accuracy without augmentation.
template <class T>
double accuracy(nn::Network<T>& net, const Dataset& ds, std::size_t batch_size = 64) {
  if (ds.size() == 0) throw Error("accuracy: empty dataset");
  std::size_t correct = 0;
  for (std::size_t start = 0; start < ds.size(); start += batch_size) {
    const std::size_t end = std::min(ds.size(), start + batch_size);
    std::vector<const Image*> imgs;
    for (std::size_t i = start; i < end; ++i) imgs.push_back(&ds.image(i));
    const auto out = net.forward(make_batch<T>(imgs));
    for (std::size_t i = start; i < end; ++i)
      if (predicted_label<T>(out.head.row(i - start), net.config().head) == ds.label(i)) ++correct;
  }
  net.release();
  return static_cast<double>(correct) / static_cast<double>(ds.size());
}

/// Mini-batch RMSProp training with on-the-fly augmentation.
///
/// Example order for epoch e comes from derive_seed(seed, {e}); the
/// augmentation of example i in epoch e uses its own stream keyed by
/// (seed, e, i), so results do not depend on how batches are produced.
template <class T>
TrainReport train(nn::Network<T>& net, const Dataset& train_ds, const Dataset* val_ds,
                  const TrainConfig& cfg, nn::RmsProp<T>* optimizer_state = nullptr) {
  if (train_ds.size() == 0) throw Error("train: empty training set");
  if (cfg.epochs < 0 || cfg.batch_size < 1) throw Error("train: epochs >= 0 and batch_size >= 1 required");
  const int arity = net.config().n_classes;
  if (train_ds.label_arity != arity)
    throw Error("train: dataset has " + std::to_string(train_ds.label_arity) +
                " classes, network head expects " + std::to_string(arity));
  if (cfg.augment) validate(cfg.augmentation);

  nn::RmsProp<T> local_opt(nn::RmsPropConfig{cfg.lr.value_or(nn::default_learning_rate(net.config().kind)),
                                             cfg.rho, cfg.eps});
  nn::RmsProp<T>& opt = optimizer_state ? *optimizer_state : local_opt;
  if (optimizer_state && optimizer_state->steps() == 0) *optimizer_state = local_opt;

  TrainReport report;
  report.configured_epochs = cfg.epochs;
  report.has_validation = val_ds != nullptr && val_ds->size() > 0;
  report.seed = cfg.seed;
  report.config_hash = hash_string(to_json(cfg).dump() + nn::to_json(net.config()).dump());

  if (cfg.augment && cfg.augmentation.featurewise_normalization)
    net.normalization() = featurewise_stats(train_ds);

  const std::set<int> ckpt_epochs(cfg.checkpoint_epochs.begin(), cfg.checkpoint_epochs.end());
  std::optional<std::filesystem::path> last_ckpt;
  auto checkpoint = [&](int epoch, bool force = false) {
    if ((!force && !ckpt_epochs.contains(epoch)) || cfg.checkpoint_dir.empty()) return;
    if (last_ckpt && report.checkpoints.back().filename() == epoch_name(epoch)) return;
    std::filesystem::create_directories(cfg.checkpoint_dir);
    const auto path = cfg.checkpoint_dir / epoch_name(epoch);
    nn::save_checkpoint(path, net, &opt, epoch);
    report.checkpoints.push_back(path);
    last_ckpt = path;
  };
  checkpoint(0);

  const std::size_t n = train_ds.size();
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    Engine order_eng = make_engine(derive_seed(cfg.seed, {static_cast<std::uint64_t>(epoch), 0x0DE7}));
    const auto order = random_permutation(n, order_eng);
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(n, start + static_cast<std::size_t>(cfg.batch_size));
      std::vector<Image> augmented;
      std::vector<const Image*> imgs;
      std::vector<int> labels;
      augmented.reserve(end - start);
      for (std::size_t k = start; k < end; ++k) {
        const std::size_t i = order[k];
        if (cfg.augment) {
          Engine aug_eng = make_engine(derive_seed(cfg.seed, {static_cast<std::uint64_t>(epoch), i, 0xA06}));
          augmented.push_back(augment(train_ds.image(i), cfg.augmentation, aug_eng));
          imgs.push_back(&augmented.back());
        } else {
          imgs.push_back(&train_ds.image(i));
        }
        labels.push_back(train_ds.label(i));
      }
      const auto batch = make_batch<T>(imgs);
      const auto targets = make_targets<T>(labels, net.config());
      T loss;
      try {
        loss = net.backward(batch, targets, nn::loss_for(net.config().head));
        opt.step(net.params());
      } catch (const NumericError& e) {
        throw TrainingDiverged(std::string("training diverged at epoch ") + std::to_string(epoch) +
                                   ": " + e.what(),
                               last_ckpt);
      }
      loss_sum += static_cast<double>(loss) * static_cast<double>(end - start);
      // Head outputs of the batch are still cached from the backward pass.
      const auto head = net.cached_head();
      for (std::size_t k = start; k < end; ++k)
        if (predicted_label<T>(head.row(k - start), net.config().head) == labels[k - start])
          ++correct;
    }
    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = loss_sum / static_cast<double>(n);
    stats.train_accuracy = static_cast<double>(correct) / static_cast<double>(n);
    if (report.has_validation) stats.val_accuracy = accuracy(net, *val_ds);
    net.release();
    stats.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    report.epochs.push_back(stats);
    if (cfg.verbose)
      std::fprintf(stderr, "epoch %3d loss %.4f acc %.4f val %s (%.1fs)\n", epoch, stats.train_loss,
                   stats.train_accuracy,
                   stats.val_accuracy ? std::to_string(*stats.val_accuracy).c_str() : "-",
                   stats.seconds);
    checkpoint(epoch);

    const bool val_done = cfg.stop_at_val_accuracy && stats.val_accuracy &&
                          *stats.val_accuracy >= *cfg.stop_at_val_accuracy;
    const bool train_done =
        cfg.stop_at_train_accuracy && stats.train_accuracy >= *cfg.stop_at_train_accuracy;
    const bool rule_done = cfg.stop_when && cfg.stop_when(stats);
    if (epoch >= cfg.min_epochs && epoch < cfg.epochs && (val_done || train_done || rule_done)) {
      report.early_stopped = true;
      // The stopping state is persisted whenever checkpointing is on.
      if (!ckpt_epochs.empty()) checkpoint(epoch, true);
      break;
    }
  }
  return report;
}

}  // namespace gcl::training

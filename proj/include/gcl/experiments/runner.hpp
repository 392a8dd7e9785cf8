#pragma once

// End-to-end execution of an experiment plan: datasets, per-replicate
// training (optionally through a shared model cache), closure evaluation,
// and every output file of the run directory.

#include <atomic>
#include <chrono>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "gcl/closure/io.hpp"
#include "gcl/closure/records.hpp"
#include "gcl/core/hash.hpp"
#include "gcl/experiments/analysis.hpp"
#include "gcl/experiments/plan.hpp"
#include "gcl/nn/checkpoint.hpp"
#include "gcl/nn/network.hpp"
#include "gcl/nn/rmsprop.hpp"
#include "gcl/report/manifest.hpp"
#include "gcl/report/output.hpp"
#include "gcl/report/svg.hpp"
#include "gcl/stimulus/export.hpp"
#include "gcl/stimulus/triples.hpp"
#include "gcl/training/augment.hpp"
#include "gcl/training/dataset.hpp"
#include "gcl/training/trainer.hpp"

namespace gcl::experiments {

struct RunOptions {
  std::filesystem::path out_dir;
  bool force = false;
  /// Overrides plan.jobs when set.
  std::optional<int> jobs;
  std::string command;
  bool verbose = false;
};

struct ExperimentResult {
  ExperimentPlan plan;
  std::vector<ModelSummary> models;
  std::vector<closure::ClosureRecord> records;
  Analysis analysis;
  std::filesystem::path out_dir;
};

/// Content hash of a dataset: pixels, labels and class names.
inline std::string dataset_hash(const training::Dataset& ds) {
  Fnv1a h;
  for (const auto& img : ds.images) {
    const std::uint64_t dims[3] = {img.height, img.width, img.channels};
    h.update(dims, sizeof dims);
    h.update(img.values.data(), img.values.size() * sizeof(float));
  }
  for (const auto& it : ds.items) {
    const std::uint64_t v[2] = {it.image, static_cast<std::uint64_t>(it.label)};
    h.update(v, sizeof v);
  }
  for (const auto& n : ds.class_names) h.update(n + '\n');
  return h.hex();
}

/// Runs fn(0..n-1) on up to `jobs` threads. Every index runs even if one
/// fails; the first failure (by index) is rethrown after the join.
inline void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next++) < n;) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const auto k = static_cast<std::size_t>(std::max(1, jobs));
  if (k == 1 || n <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < std::min(k, n); ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

namespace detail {

inline std::mutex& log_mutex() {
  static std::mutex m;
  return m;
}

inline void log(const std::string& line) {
  std::lock_guard lock(log_mutex());
  std::fprintf(stderr, "%s\n", line.c_str());
}

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw IoError(path.string(), "cannot open for writing");
  out << j.dump(2) << '\n';
  if (!out) throw IoError(path.string(), "write failed");
}

inline void link_or_copy(const std::filesystem::path& from, const std::filesystem::path& to) {
  std::error_code ec;
  std::filesystem::create_hard_link(from, to, ec);
  if (ec) std::filesystem::copy_file(from, to, std::filesystem::copy_options::overwrite_existing);
}

/// Copies a finished model directory into the cache under `key`, via a
/// temporary directory and a rename so concurrent runs never see a partial
/// entry.
inline void publish_to_cache(const std::filesystem::path& cache, const std::string& key,
                             const std::filesystem::path& model_dir) {
  namespace fs = std::filesystem;
  const auto final_dir = cache / key;
  if (fs::exists(final_dir / "summary.json")) return;
  fs::create_directories(cache);
  const auto tmp = cache / (key + ".tmp." + std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id())));
  fs::remove_all(tmp);
  fs::create_directories(tmp);
  for (const auto& e : fs::directory_iterator(model_dir))
    if (e.is_regular_file()) link_or_copy(e.path(), tmp / e.path().filename());
  std::error_code ec;
  fs::rename(tmp, final_dir, ec);
  if (ec) fs::remove_all(tmp);  // another run published the same key first
}

inline nlohmann::json summary_json(const ModelSummary& m) {
  return {{"epochs", m.epochs},
          {"early_stopped", m.early_stopped},
          {"train_accuracy", m.train_accuracy},
          {"val_accuracy", m.val_accuracy ? nlohmann::json(*m.val_accuracy) : nlohmann::json(nullptr)},
          {"matched", m.matched}};
}

inline void apply_summary(ModelSummary& m, const nlohmann::json& j) {
  m.epochs = j.at("epochs").get<int>();
  m.early_stopped = j.at("early_stopped").get<bool>();
  m.train_accuracy = j.at("train_accuracy").get<double>();
  if (!j.at("val_accuracy").is_null()) m.val_accuracy = j.at("val_accuracy").get<double>();
  m.matched = j.at("matched").get<std::string>();
}

}  // namespace detail

/// State shared by all replicate jobs of one run.
struct RunContext {
  ExperimentPlan plan;
  std::filesystem::path out_dir;
  std::vector<stimulus::Triple> triples;
  std::optional<training::Dataset> natural;
  std::string natural_hash;
  bool verbose = false;

  std::filesystem::path model_dir(const std::string& id) const { return out_dir / "models" / id; }
};

inline RunContext make_context(const ExperimentPlan& plan, const std::filesystem::path& out_dir) {
  RunContext ctx;
  ctx.plan = plan;
  ctx.out_dir = out_dir;
  ctx.triples = stimulus::build_triples(plan.triple_seed, {plan.strict_position});
  if (plan.needs_natural_data()) {
    training::NaturalOptions o;
    o.classes = plan.data.classes;
    o.per_class = plan.data.per_class;
    o.image_size = plan.data.image_size;
    o.seed = plan.data.selection_seed;
    o.bad_files = plan.data.bad_files;
    ctx.natural = training::load_natural(plan.data.resolved_root(), o);
    ctx.natural_hash = dataset_hash(*ctx.natural);
  }
  return ctx;
}

/// Description of one model to obtain. `data_key` must identify the
/// training data (content hashes plus any derivation parameters).
template <class T>
struct ModelJob {
  std::string id;
  std::string condition;
  int replicate = 0;
  nn::NetConfig net;
  training::TrainConfig train;  ///< seed is set from the replicate
  const training::Dataset* train_ds = nullptr;
  const training::Dataset* val_ds = nullptr;
  std::string data_key;
  /// No training: the net keeps its initial weights (with train-set
  /// normalization when the training config asks for it).
  bool untrained = false;
  /// Where the model files go; empty means models/<id>.
  std::filesystem::path dir;
};

template <class T>
struct TrainedModel {
  ModelSummary summary;
  nn::Network<T> net;
};

template <class T>
std::string model_key(const ModelJob<T>& job) {
  nlohmann::json k{{"net", nn::to_json(job.net)},
                   {"seed", job.train.seed},
                   {"dtype", nn::dtype_name<T>()},
                   {"train", training::to_json(job.train)},
                   {"data", job.data_key},
                   {"untrained", job.untrained}};
  return hash_string(k.dump());
}

/// Writes the model directory (model.ckpt, train.csv, summary.json).
template <class T>
void save_model_dir(const std::filesystem::path& dir, nn::Network<T>& net, const training::TrainReport* report,
                    const ModelSummary& summary, int epoch) {
  std::filesystem::create_directories(dir);
  nn::save_checkpoint<T>(dir / "model.ckpt", net, nullptr, epoch);
  training::TrainReport empty;
  training::write_report_csv(dir / "train.csv", report ? *report : empty);
  detail::write_json(dir / "summary.json", detail::summary_json(summary));
}

/// Trains (or loads from the cache) the model described by `job` and leaves
/// its files in the run's models/<id>/ directory.
template <class T>
TrainedModel<T> obtain_model(const RunContext& ctx, ModelJob<T> job) {
  namespace fs = std::filesystem;
  const auto dir = job.dir.empty() ? ctx.model_dir(job.id) : job.dir;
  ModelSummary s;
  s.model_id = job.id;
  s.condition = job.condition;
  s.replicate = job.replicate;
  s.seed = job.train.seed;
  const auto key = model_key(job);
  const auto& cache = ctx.plan.model_cache;

  if (!cache.empty() && fs::exists(cache / key / "summary.json")) {
    fs::create_directories(dir);
    for (const auto& e : fs::directory_iterator(cache / key))
      if (e.is_regular_file()) detail::link_or_copy(e.path(), dir / e.path().filename());
    std::ifstream in(dir / "summary.json");
    detail::apply_summary(s, nlohmann::json::parse(in));
    auto ck = nn::load_checkpoint<T>(dir / "model.ckpt");
    if (ctx.verbose) detail::log("[" + job.id + "] loaded from model cache " + key);
    return {s, std::move(ck.net)};
  }

  const auto t0 = std::chrono::steady_clock::now();
  nn::Network<T> net(job.net, job.train.seed);
  std::optional<training::TrainReport> report;
  if (job.untrained) {
    if (job.train.augment && job.train.augmentation.featurewise_normalization)
      net.normalization() = training::featurewise_stats(*job.train_ds);
    s.train_accuracy = training::accuracy(net, *job.train_ds);
    if (job.val_ds && job.val_ds->size() > 0) s.val_accuracy = training::accuracy(net, *job.val_ds);
    net.release();
  } else {
    auto cfg = job.train;
    cfg.verbose = cfg.verbose || ctx.verbose;
    if (!cfg.checkpoint_epochs.empty()) cfg.checkpoint_dir = dir;
    report = training::train(net, *job.train_ds, job.val_ds, cfg);
    s.epochs = static_cast<int>(report->epochs.size());
    s.early_stopped = report->early_stopped;
    s.train_accuracy = report->final_train_accuracy();
    s.val_accuracy = report->final_val_accuracy();
  }
  save_model_dir(dir, net, report ? &*report : nullptr, s, s.epochs);
  if (!cache.empty()) detail::publish_to_cache(cache, key, dir);
  if (ctx.verbose) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "[%s] %d epochs, train %.3f, val %s (%.0f s)", job.id.c_str(), s.epochs,
                  s.train_accuracy, s.val_accuracy ? std::to_string(*s.val_accuracy).c_str() : "-",
                  std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    detail::log(buf);
  }
  return {s, std::move(net)};
}

/// Layers to probe for a net under this plan.
template <class T>
std::vector<std::string> resolve_layers(const ExperimentPlan& plan, const nn::Network<T>& net) {
  if (plan.layers.empty()) return {kPenultimate};
  if (plan.layers.size() == 1 && plan.layers.front() == "all") return net.probe_layers();
  return plan.layers;
}

/// Output of one replicate job: its models and their closure records.
struct ReplicateOutput {
  std::vector<ModelSummary> models;
  std::vector<closure::ClosureRecord> records;
};

namespace detail {

template <class T>
void evaluate_into(ReplicateOutput& out, const RunContext& ctx, TrainedModel<T>& m,
                   const std::vector<stimulus::Triple>& triples) {
  auto recs = closure::closure_records(m.net, triples, resolve_layers(ctx.plan, m.net), m.summary.model_id);
  out.records.insert(out.records.end(), recs.begin(), recs.end());
  out.models.push_back(m.summary);
}

inline std::string rid(const std::string& condition, int r) { return condition + "_r" + std::to_string(r); }

template <class T>
ModelJob<T> natural_job(const RunContext& ctx, int r, const training::Dataset& tr, const training::Dataset& va) {
  const auto& p = ctx.plan;
  ModelJob<T> job;
  job.id = rid("natural", r);
  job.condition = "natural";
  job.replicate = r;
  job.net = p.net;
  job.train = p.train;
  job.train.seed = p.replicate_seed(r);
  job.train_ds = &tr;
  job.val_ds = &va;
  job.data_key = "natural:" + ctx.natural_hash + ":val=" + csv::format_double(p.data.val_fraction);
  return job;
}

template <class T>
ReplicateOutput run_sanity_replicate(const RunContext& ctx, int r) {
  const auto& p = ctx.plan;
  const auto seed = p.replicate_seed(r);
  ReplicateOutput out;
  for (auto task : {training::StimulusTask::CD, training::StimulusTask::BD}) {
    const auto split = training::make_cd_bd_sets(ctx.triples, task, seed);
    ModelJob<T> job;
    job.condition = std::string(training::to_string(task));
    job.id = rid(job.condition, r);
    job.replicate = r;
    job.net = p.net;
    job.train = p.train;
    job.train.seed = seed;
    job.train_ds = &split.train;
    job.val_ds = &split.val;
    job.data_key = "stimulus:" + job.condition + ":" + dataset_hash(split.train) + ":" + dataset_hash(split.val);
    auto m = obtain_model<T>(ctx, job);
    // Sanity nets have seen the training triples; they are probed on held-out ones.
    evaluate_into(out, ctx, m, closure::select_triples(ctx.triples, split.val_triples));
  }
  return out;
}

template <class T>
ReplicateOutput run_ablation_replicate(const RunContext& ctx, int r) {
  const auto& p = ctx.plan;
  const auto seed = p.replicate_seed(r);
  const auto& full = *ctx.natural;
  const auto [tr, va] = training::split_dataset(full, p.data.val_fraction, seed);
  ReplicateOutput out;
  {
    auto m = obtain_model<T>(ctx, natural_job<T>(ctx, r, tr, va));
    evaluate_into(out, ctx, m, ctx.triples);
  }

  ModelJob<T> job = natural_job<T>(ctx, r, tr, va);
  job.condition = ablation_condition(p.kind);
  job.id = rid(job.condition, r);
  job.train = p.ablation_train;
  job.train.seed = seed;
  std::optional<training::Dataset> abl_tr, abl_va;
  switch (p.kind) {
    case ExperimentKind::WhiteNoise: {
      const std::size_t count = p.data.noise_count ? p.data.noise_count : tr.size();
      abl_tr = training::make_white_noise(count, p.data.classes, seed, p.data.image_size, full.images.front().channels);
      job.train_ds = &*abl_tr;
      job.val_ds = nullptr;
      job.data_key = "white_noise:" + std::to_string(count) + ":" + std::to_string(p.data.classes) + ":" +
                     std::to_string(p.data.image_size);
      break;
    }
    case ExperimentKind::ShuffledPixels: {
      // Same split seed as the natural net, so the same images are held out.
      const auto shuffled = training::shuffle_pixels(full, seed, p.data.per_image_shuffle);
      std::tie(abl_tr, abl_va) = training::split_dataset(shuffled, p.data.val_fraction, seed);
      job.train_ds = &*abl_tr;
      job.val_ds = &*abl_va;
      job.data_key += std::string(":shuffled_pixels") + (p.data.per_image_shuffle ? ":per_image" : "");
      break;
    }
    case ExperimentKind::ShuffledLabels:
      // Only training labels are permuted; validation keeps the true ones.
      abl_tr = training::shuffle_labels(tr, seed);
      job.train_ds = &*abl_tr;
      job.data_key += ":shuffled_labels";
      break;
    case ExperimentKind::Untrained:
      job.untrained = true;
      job.train = p.train;
      job.train.seed = seed;
      break;
    default: throw Error("not an ablation");
  }
  auto m = obtain_model<T>(ctx, job);
  evaluate_into(out, ctx, m, ctx.triples);
  return out;
}

template <class T>
ReplicateOutput run_conv_vs_fc_replicate(const RunContext& ctx, int r) {
  const auto& p = ctx.plan;
  const auto seed = p.replicate_seed(r);
  const auto [tr, va] = training::split_dataset(*ctx.natural, p.data.val_fraction, seed);
  ReplicateOutput out;
  auto conv_job = natural_job<T>(ctx, r, tr, va);
  conv_job.condition = "conv";
  conv_job.id = rid("conv", r);
  auto conv = obtain_model<T>(ctx, conv_job);
  if (!conv.summary.val_accuracy) throw Error("conv net has no validation accuracy to match");
  const double target = *conv.summary.val_accuracy;
  evaluate_into(out, ctx, conv, ctx.triples);

  // FC accuracy matching: each learning-rate scale gets a fresh net that
  // stops as soon as it lands within tolerance of the conv accuracy.
  const double base_lr = p.fc_train.lr.value_or(nn::default_learning_rate(nn::NetKind::FullyConnected));
  std::optional<TrainedModel<T>> best;
  std::filesystem::path best_dir;
  double best_gap = 0.0;
  std::vector<std::filesystem::path> attempts;
  for (double scale : p.matching.lr_scales) {
    ModelJob<T> job;
    job.id = rid("fc", r);
    job.condition = "fc";
    job.replicate = r;
    job.net = p.fc_net;
    job.train = p.fc_train;
    job.train.seed = seed;
    job.train.lr = base_lr * scale;
    job.train.epochs = p.matching.max_epochs;
    job.train.stop_at_val_accuracy.reset();
    const double tol = p.matching.tolerance;
    job.train.stop_when = [target, tol](const training::EpochStats& e) {
      return e.val_accuracy && std::abs(*e.val_accuracy - target) <= tol;
    };
    job.train_ds = &tr;
    job.val_ds = &va;
    job.data_key = "natural:" + ctx.natural_hash + ":val=" + csv::format_double(p.data.val_fraction) +
                   ":match=" + csv::format_double(target) + "+-" + csv::format_double(tol);
    job.dir = ctx.model_dir(job.id + ".attempt" + std::to_string(attempts.size() + 1));
    attempts.push_back(job.dir);
    auto m = obtain_model<T>(ctx, job);
    const double gap = std::abs(m.summary.val_accuracy.value_or(0.0) - target);
    const bool ok = gap <= tol;
    if (ctx.verbose)
      log("[" + job.id + "] lr scale " + csv::format_double(scale) + ": gap " + csv::format_double(gap) +
          (ok ? " (matched)" : ""));
    if (!best || gap < best_gap) {
      best.emplace(std::move(m));
      best_dir = job.dir;
      best_gap = gap;
    }
    if (ok) break;
  }
  best->summary.matched = best_gap <= p.matching.tolerance ? "yes" : "no";
  // Only the attempt closest to the conv accuracy is kept.
  std::filesystem::rename(best_dir, ctx.model_dir(best->summary.model_id));
  for (const auto& a : attempts) std::filesystem::remove_all(a);
  detail::write_json(ctx.model_dir(best->summary.model_id) / "summary.json", summary_json(best->summary));
  evaluate_into(out, ctx, *best, ctx.triples);
  return out;
}

template <class T>
ReplicateOutput run_layerwise_replicate(const RunContext& ctx, int r) {
  const auto& p = ctx.plan;
  const auto [tr, va] = training::split_dataset(*ctx.natural, p.data.val_fraction, p.replicate_seed(r));
  ReplicateOutput out;
  auto m = obtain_model<T>(ctx, natural_job<T>(ctx, r, tr, va));
  evaluate_into(out, ctx, m, ctx.triples);
  return out;
}

template <class T>
ReplicateOutput run_replicate(const RunContext& ctx, int r) {
  switch (ctx.plan.kind) {
    case ExperimentKind::SanityCD_BD: return run_sanity_replicate<T>(ctx, r);
    case ExperimentKind::ConvVsFC: return run_conv_vs_fc_replicate<T>(ctx, r);
    case ExperimentKind::LayerWise: return run_layerwise_replicate<T>(ctx, r);
    default: return run_ablation_replicate<T>(ctx, r);
  }
}

/// Orders records by condition (first-seen model order), model and layer so
/// the CSV does not depend on which replicate finished first.
inline std::vector<closure::ClosureRecord> condition_major(const std::vector<ModelSummary>& models,
                                                           const std::vector<closure::ClosureRecord>& records) {
  std::vector<std::string> order;
  for (const auto& cond : [&] {
         std::vector<std::string> cs;
         for (const auto& m : models)
           if (std::find(cs.begin(), cs.end(), m.condition) == cs.end()) cs.push_back(m.condition);
         return cs;
       }())
    for (const auto& m : models)
      if (m.condition == cond) order.push_back(m.model_id);
  std::vector<closure::ClosureRecord> out;
  out.reserve(records.size());
  for (const auto& id : order)
    for (const auto& r : records)
      if (r.model_id == id) out.push_back(r);
  return out;
}

inline std::vector<ModelSummary> condition_major(const std::vector<ModelSummary>& models) {
  std::vector<ModelSummary> out;
  for (const auto& m : models) {
    bool seen = false;
    for (const auto& o : out) seen = seen || o.condition == m.condition;
    if (seen) continue;
    for (const auto& k : models)
      if (k.condition == m.condition) out.push_back(k);
  }
  return out;
}

}  // namespace detail

/// Writes curves.csv, stats.json, verdict.json and plots/ from an analysis.
inline void write_analysis(const std::filesystem::path& dir, const ExperimentPlan& plan,
                           const std::vector<ModelSummary>& models, const Analysis& a) {
  closure::write_curves_csv(dir / "curves.csv", a.curves);
  detail::write_json(dir / "stats.json", a.stats);
  detail::write_json(dir / "verdict.json", a.verdict);
  const auto plots = dir / "plots";
  std::filesystem::create_directories(plots);

  // Pooled curves: one chart per layer (one line per condition), or one per
  // condition (one line per layer) for layer-wise runs.
  std::vector<std::string> conditions;
  for (const auto& m : models)
    if (std::find(conditions.begin(), conditions.end(), m.condition) == conditions.end())
      conditions.push_back(m.condition);
  std::vector<closure::ClosureCurve> pooled;
  for (const auto& c : a.curves)
    if (std::find(conditions.begin(), conditions.end(), c.model_id) != conditions.end()) pooled.push_back(c);
  const std::string title = plan.name;
  if (plan.kind == ExperimentKind::LayerWise) {
    for (const auto& cond : conditions) {
      std::vector<closure::ClosureCurve> cs;
      for (const auto& c : pooled)
        if (c.model_id == cond) cs.push_back(c);
      report::write_svg(plots / ("layers_" + cond + ".svg"), report::plot_from_curves(cs, title + " (" + cond + ")"));
    }
  } else {
    std::vector<std::string> layers;
    for (const auto& c : pooled)
      if (std::find(layers.begin(), layers.end(), c.layer) == layers.end()) layers.push_back(c.layer);
    for (const auto& layer : layers) {
      std::vector<closure::ClosureCurve> cs;
      for (const auto& c : pooled)
        if (c.layer == layer) cs.push_back(c);
      report::write_svg(plots / ("closure_" + layer + ".svg"), report::plot_from_curves(cs, title + " (" + layer + ")"));
    }
  }
}

/// Runs the plan and writes the full output directory.
template <class T>
ExperimentResult run_plan(const ExperimentPlan& plan, const RunOptions& opt) {
  const auto started = report::utc_timestamp();
  report::prepare_output_dir(opt.out_dir, opt.force);
  const auto& dir = opt.out_dir;
  auto ctx = make_context(plan, dir);
  ctx.verbose = opt.verbose;
  std::filesystem::create_directories(dir / "models");
  detail::write_json(dir / "plan.json", to_json(plan));
  stimulus::write_triples_csv(dir / "triples.csv", ctx.triples);

  const int jobs = opt.jobs.value_or(plan.jobs);
  std::vector<ReplicateOutput> outs(static_cast<std::size_t>(plan.replications));
  parallel_for(outs.size(), jobs,
               [&](std::size_t r) { outs[r] = detail::run_replicate<T>(ctx, static_cast<int>(r)); });

  ExperimentResult res;
  res.plan = plan;
  res.out_dir = dir;
  std::vector<ModelSummary> models;
  std::vector<closure::ClosureRecord> records;
  for (auto& o : outs) {
    models.insert(models.end(), o.models.begin(), o.models.end());
    records.insert(records.end(), o.records.begin(), o.records.end());
  }
  res.models = detail::condition_major(models);
  res.records = detail::condition_major(res.models, records);
  write_models_csv(dir / "models.csv", res.models);
  closure::write_records_csv(dir / "records.csv", res.records);
  res.analysis = analyze(plan, res.records, res.models);
  write_analysis(dir, plan, res.models, res.analysis);

  report::RunManifest m;
  m.command = opt.command;
  m.config = to_json(plan);
  m.seeds = {{"base_seed", plan.base_seed}, {"triple_seed", plan.triple_seed}, {"ci_seed", plan.ci.seed}};
  m.inputs["triples"] = hash_file(dir / "triples.csv");
  if (ctx.natural) m.inputs["natural_dataset"] = ctx.natural_hash;
  m.started_at = started;
  report::write_manifest(dir, m);
  return res;
}

inline ExperimentResult run_experiment(const ExperimentPlan& plan, const RunOptions& opt) {
  return plan.precision == "f64" ? run_plan<double>(plan, opt) : run_plan<float>(plan, opt);
}

namespace detail {

inline ExperimentResult run_checked(const ExperimentPlan& plan, const RunOptions& opt,
                                    std::initializer_list<ExperimentKind> kinds, const char* what) {
  if (std::find(kinds.begin(), kinds.end(), plan.kind) == kinds.end())
    throw Error(std::string(what) + ": plan kind is " + std::string(to_string(plan.kind)));
  return run_experiment(plan, opt);
}

}  // namespace detail

inline ExperimentResult run_sanity(const ExperimentPlan& plan, const RunOptions& opt) {
  return detail::run_checked(plan, opt, {ExperimentKind::SanityCD_BD}, "run_sanity");
}

inline ExperimentResult run_ablation(const ExperimentPlan& plan, const RunOptions& opt) {
  return detail::run_checked(plan, opt,
                             {ExperimentKind::WhiteNoise, ExperimentKind::ShuffledPixels, ExperimentKind::Untrained,
                              ExperimentKind::ShuffledLabels},
                             "run_ablation");
}

inline ExperimentResult run_conv_vs_fc(const ExperimentPlan& plan, const RunOptions& opt) {
  return detail::run_checked(plan, opt, {ExperimentKind::ConvVsFC}, "run_conv_vs_fc");
}

inline ExperimentResult run_layerwise(const ExperimentPlan& plan, const RunOptions& opt) {
  return detail::run_checked(plan, opt, {ExperimentKind::LayerWise}, "run_layerwise");
}

/// Re-derives curves, statistics and the verdict of a finished run from its
/// plan.json, records.csv and models.csv alone.
inline Analysis recompute_analysis(const std::filesystem::path& dir) {
  const auto plan = load_plan(dir / "plan.json");
  return analyze(plan, closure::read_records_csv(dir / "records.csv"), read_models_csv(dir / "models.csv"));
}

}  // namespace gcl::experiments

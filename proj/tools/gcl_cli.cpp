// gcl: command-line driver for stimuli, training, closure and experiments.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "gcl/closure/curve.hpp"
#include "gcl/closure/io.hpp"
#include "gcl/closure/records.hpp"
#include "gcl/core/config.hpp"
#include "gcl/core/error.hpp"
#include "gcl/core/hash.hpp"
#include "gcl/experiments/plan.hpp"
#include "gcl/experiments/runner.hpp"
#include "gcl/experiments/train_spec.hpp"
#include "gcl/nn/checkpoint.hpp"
#include "gcl/report/manifest.hpp"
#include "gcl/report/output.hpp"
#include "gcl/report/svg.hpp"
#include "gcl/stimulus/export.hpp"
#include "gcl/stimulus/triples.hpp"
#include "gcl/version.hpp"

namespace fs = std::filesystem;
using namespace gcl;

namespace {

struct Common {
  fs::path out;
  std::optional<std::uint64_t> seed;
  int jobs = 1;
  fs::path config;
  bool force = false;
  bool verbose = false;
};

void add_common(CLI::App* cmd, Common& c, bool needs_config) {
  cmd->add_option("--out", c.out, "Output directory")->required();
  cmd->add_option("--seed", c.seed, "Seed (overrides the configuration)");
  cmd->add_option("--jobs", c.jobs, "Parallel replicate jobs")->check(CLI::PositiveNumber);
  auto* cfg = cmd->add_option("--config", c.config, "Configuration file (TOML or JSON)");
  if (needs_config) cfg->required();
  cmd->add_flag("--force", c.force, "Replace the contents of a non-empty --out");
  cmd->add_flag("--verbose", c.verbose, "Progress on stderr");
}

std::string command_line(int argc, char** argv) {
  std::string s;
  for (int i = 0; i < argc; ++i) s += (i ? " " : "") + std::string(argv[i]);
  return s;
}

/// Writes the manifest and checks every listed output against it.
void finish_run(const fs::path& dir, report::RunManifest m) {
  report::write_manifest(dir, m);
  const auto written = report::read_manifest(dir / report::kManifestName);
  const auto bad = report::verify_outputs(dir, written);
  if (!bad.empty()) throw IoError(dir.string(), "output failed validation: " + bad.front());
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  for (std::string item; std::getline(in, item, ',');)
    if (!item.empty()) out.push_back(item);
  return out;
}

// ---------------------------------------------------------------------------

int cmd_gen_stimuli(const Common& c, const std::string& format, bool strict, const std::string& cmdline) {
  const auto started = report::utc_timestamp();
  const auto fmt = stimulus::parse_export_format(format);
  report::prepare_output_dir(c.out, c.force);
  const std::uint64_t seed = c.seed.value_or(0);
  stimulus::export_stimuli(c.out, fmt);
  const auto triples = stimulus::build_triples(seed, {strict});
  stimulus::write_triples_csv(c.out / "triples.csv", triples);
  report::RunManifest m;
  m.command = cmdline;
  m.config = {{"format", format}, {"seed", seed}, {"strict_position", strict}};
  m.seeds = {{"triple_seed", seed}};
  m.started_at = started;
  finish_run(c.out, m);
  std::printf("wrote %zu stimuli and %zu triples to %s\n", stimulus::kSpecCount, triples.size(),
              c.out.string().c_str());
  return 0;
}

int cmd_train(const Common& c, const std::string& cmdline) {
  const auto started = report::utc_timestamp();
  auto j = config::load_file(c.config);
  if (j.is_object() && j.contains("manifest_version") && j.contains("config")) j = j["config"];
  if (c.seed) j["seed"] = *c.seed;
  auto spec = experiments::train_spec_from_json(j);
  spec.train.verbose = spec.train.verbose || c.verbose;
  report::prepare_output_dir(c.out, c.force);
  const auto outcome = spec.precision == "f64" ? experiments::run_train<double>(spec, c.out)
                                               : experiments::run_train<float>(spec, c.out);
  report::RunManifest m;
  m.command = cmdline;
  m.config = experiments::to_json(spec);
  m.seeds = {{"seed", spec.seed}};
  m.inputs["training_data"] = outcome.dataset_hash;
  m.started_at = started;
  finish_run(c.out, m);
  const auto& s = outcome.summary;
  std::printf("trained %d epochs: train accuracy %.4f", s.epochs, s.train_accuracy);
  if (s.val_accuracy) std::printf(", validation accuracy %.4f", *s.val_accuracy);
  std::printf("\n");
  return 0;
}

template <class T>
std::vector<closure::ClosureRecord> closure_for(const fs::path& checkpoint, const std::vector<std::string>& requested,
                                                const std::vector<stimulus::Triple>& triples,
                                                const std::string& model_id, std::vector<std::string>& layers) {
  auto ck = nn::load_checkpoint<T>(checkpoint);
  const auto names = ck.net.layer_names();
  layers = requested;
  if (layers.size() == 1 && layers.front() == "all") layers = ck.net.probe_layers();
  for (const auto& l : layers)
    if (std::find(names.begin(), names.end(), l) == names.end()) {
      std::string valid;
      for (const auto& n : names) valid += (valid.empty() ? "" : ", ") + n;
      throw Error("unknown layer '" + l + "' (valid layers: " + valid + ")");
    }
  return closure::closure_records(ck.net, triples, layers, model_id);
}

int cmd_closure(const Common& c, const fs::path& checkpoint, const std::string& layer_list,
                const fs::path& triples_path, const std::string& model_id, const std::string& ci_method,
                int resamples, const std::string& cmdline) {
  const auto started = report::utc_timestamp();
  report::check_output_dir(c.out, c.force);
  const auto header = nn::read_checkpoint_header(checkpoint);
  const std::uint64_t seed = c.seed.value_or(0);
  const auto triples = triples_path.empty() ? stimulus::build_triples(seed) : stimulus::read_triples_csv(triples_path);
  auto requested = split_list(layer_list);
  if (requested.empty()) requested = {experiments::kPenultimate};
  // Validate before touching --out so a bad layer leaves nothing behind.
  std::vector<std::string> layers;
  std::vector<closure::ClosureRecord> records =
      header.at("dtype") == "f64" ? closure_for<double>(checkpoint, requested, triples, model_id, layers)
                                  : closure_for<float>(checkpoint, requested, triples, model_id, layers);
  report::prepare_output_dir(c.out, c.force);
  closure::CiOptions ci;
  ci.method = closure::parse_ci_method(ci_method);
  ci.resamples = resamples;
  ci.seed = seed;
  const auto curves = closure::closure_curves(records, ci);
  closure::write_records_csv(c.out / "records.csv", records);
  closure::write_curves_csv(c.out / "curves.csv", curves);
  if (!triples_path.empty()) fs::copy_file(triples_path, c.out / "triples.csv");
  else stimulus::write_triples_csv(c.out / "triples.csv", triples);
  fs::create_directories(c.out / "plots");
  report::write_svg(c.out / "plots" / "closure.svg", report::plot_from_curves(curves, model_id));
  report::RunManifest m;
  m.command = cmdline;
  m.config = {{"checkpoint", checkpoint.string()}, {"layers", layers},  {"model_id", model_id},
              {"ci", closure::to_string(ci.method)},  {"resamples", resamples}, {"seed", seed}};
  m.seeds = {{"triple_seed", seed}, {"ci_seed", seed}};
  m.inputs["checkpoint"] = hash_file(checkpoint);
  if (!triples_path.empty()) m.inputs["triples"] = hash_file(triples_path);
  m.started_at = started;
  finish_run(c.out, m);
  for (const auto& cv : curves) {
    std::printf("%s:", cv.layer.c_str());
    for (const auto& p : cv.points) std::printf(" %d=%.4f", p.edge_length, p.mean);
    std::printf("\n");
  }
  return 0;
}

int cmd_experiment(const Common& c, const fs::path& plan_path, const std::optional<fs::path>& data_dir,
                   const std::optional<fs::path>& cache, std::optional<int> replications, const std::string& cmdline) {
  auto j = config::load_file(plan_path);
  if (j.is_object() && j.contains("manifest_version") && j.contains("config")) j = j["config"];
  if (c.seed) {
    j["base_seed"] = *c.seed;
    j.erase("triple_seed");
  }
  if (data_dir) j["data"]["root"] = data_dir->string();
  if (cache) j["model_cache"] = cache->string();
  if (replications) j["replications"] = *replications;
  const auto plan = experiments::plan_from_json(j);
  experiments::RunOptions opt;
  opt.out_dir = c.out;
  opt.force = c.force;
  if (c.jobs > 1) opt.jobs = c.jobs;
  opt.command = cmdline;
  opt.verbose = c.verbose;
  const auto res = experiments::run_experiment(plan, opt);
  const auto written = report::read_manifest(c.out / report::kManifestName);
  const auto bad = report::verify_outputs(c.out, written);
  if (!bad.empty()) throw IoError(c.out.string(), "output failed validation: " + bad.front());
  const auto& v = res.analysis.verdict;
  std::printf("%s: pass=%s\n", plan.name.c_str(), v.value("pass", nlohmann::json()).dump().c_str());
  std::printf("%s\n", v.dump(2).c_str());
  return 0;
}

int cmd_report(const Common& c, const std::optional<fs::path>& run_dir, const std::vector<fs::path>& curve_files,
               const std::string& title, const std::string& cmdline) {
  const auto started = report::utc_timestamp();
  if (!run_dir && curve_files.empty()) throw Error("report: give --run DIR or --curves FILE");
  report::prepare_output_dir(c.out, c.force);
  report::RunManifest m;
  m.command = cmdline;
  m.started_at = started;
  if (run_dir) {
    const auto plan = experiments::load_plan(*run_dir / "plan.json");
    const auto models = experiments::read_models_csv(*run_dir / "models.csv");
    const auto a = experiments::recompute_analysis(*run_dir);
    experiments::write_analysis(c.out, plan, models, a);
    m.config = experiments::to_json(plan);
    for (const char* f : {"plan.json", "records.csv", "models.csv"}) m.inputs[f] = hash_file(*run_dir / f);
    std::printf("%s: pass=%s\n", plan.name.c_str(), a.verdict.value("pass", nlohmann::json()).dump().c_str());
  } else {
    fs::create_directories(c.out / "plots");
    std::vector<closure::ClosureCurve> all;
    for (const auto& f : curve_files) {
      const auto cs = closure::read_curves_csv(f);
      all.insert(all.end(), cs.begin(), cs.end());
      m.inputs[f.string()] = hash_file(f);
    }
    report::write_svg(c.out / "plots" / "closure.svg", report::plot_from_curves(all, title));
    m.config = {{"title", title}};
  }
  finish_run(c.out, m);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Closure measurement for convolutional networks on triangle-fragment stimuli"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);
  const auto cmdline = command_line(argc, argv);

  Common gen_c, train_c, closure_c, exp_c, report_c;

  auto* gen = app.add_subcommand("gen-stimuli", "Render all stimuli and build the triple list");
  add_common(gen, gen_c, false);
  std::string format = "png";
  bool strict = false;
  gen->add_option("--format", format, "png or raw")->check(CLI::IsMember({"png", "raw"}));
  gen->add_flag("--strict-position", strict, "Also require the complete image at a different position");

  auto* train = app.add_subcommand("train", "Train one network");
  add_common(train, train_c, true);

  auto* clos = app.add_subcommand("closure", "Closure records and curves for a checkpoint");
  add_common(clos, closure_c, false);
  fs::path checkpoint, triples_path;
  std::string layers, model_id = "model", ci_method = "bootstrap";
  int resamples = 1000;
  clos->add_option("--checkpoint", checkpoint, "Model checkpoint")->required()->check(CLI::ExistingFile);
  clos->add_option("--layers", layers, "Comma-separated layer names, or 'all' (default fc_finale)");
  clos->add_option("--triples", triples_path, "Triples CSV (default: built from --seed)")->check(CLI::ExistingFile);
  clos->add_option("--model-id", model_id, "Model id written to the records");
  clos->add_option("--ci", ci_method, "bootstrap or t")->check(CLI::IsMember({"bootstrap", "t"}));
  clos->add_option("--resamples", resamples, "Bootstrap resamples")->check(CLI::Range(10, 1000000));

  auto* exp = app.add_subcommand("experiment", "Run an experiment plan end to end");
  add_common(exp, exp_c, false);
  fs::path plan_path;
  std::optional<fs::path> data_dir, cache;
  std::optional<int> replications;
  exp->add_option("--plan", plan_path, "Experiment plan (TOML or JSON, or a run manifest)")->check(CLI::ExistingFile);
  exp->add_option("--data-dir", data_dir, "Natural-image root (overrides data.root)");
  exp->add_option("--model-cache", cache, "Shared trained-model cache directory");
  exp->add_option("--replications", replications, "Override the replication count")->check(CLI::PositiveNumber);

  auto* rep = app.add_subcommand("report", "Statistics, verdict and plots from stored results");
  add_common(rep, report_c, false);
  std::optional<fs::path> run_dir;
  std::vector<fs::path> curve_files;
  std::string title;
  rep->add_option("--run", run_dir, "Experiment output directory")->check(CLI::ExistingDirectory);
  rep->add_option("--curves", curve_files, "Curve CSV files")->check(CLI::ExistingFile);
  rep->add_option("--title", title, "Plot title");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) return cmd_gen_stimuli(gen_c, format, strict, cmdline);
    if (*train) return cmd_train(train_c, cmdline);
    if (*clos) return cmd_closure(closure_c, checkpoint, layers, triples_path, model_id, ci_method, resamples, cmdline);
    if (*exp) {
      if (plan_path.empty()) plan_path = exp_c.config;
      if (plan_path.empty()) throw Error("experiment: --plan (or --config) is required");
      return cmd_experiment(exp_c, plan_path, data_dir, cache, replications, cmdline);
    }
    if (*rep) return cmd_report(report_c, run_dir, curve_files, title, cmdline);
  } catch (const config::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}

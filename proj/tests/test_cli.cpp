#include <sys/wait.h>

#include <algorithm>
#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "gcl/closure/io.hpp"
#include "gcl/core/csv.hpp"
#include "gcl/report/manifest.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
  int code = -1;
  std::string output;  ///< stdout and stderr interleaved
};

Result run(const std::string& args) {
  const std::string cmd = std::string(GCL_CLI) + " " + args + " 2>&1";
  Result r;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  std::array<char, 4096> buf;
  for (std::size_t n; (n = std::fread(buf.data(), 1, buf.size(), p)) > 0;) r.output.append(buf.data(), n);
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

fs::path temp_dir(const std::string& name) {
  auto d = fs::temp_directory_path() / ("gcl_test_cli_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write(const fs::path& p, const std::string& text) {
  std::ofstream f(p);
  f << text;
}

std::size_t lines(const fs::path& p) {
  const auto s = slurp(p);
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

// A one-epoch CD net small enough to train in seconds.
const char* kTinyTrain = R"(seed = 5
[net]
custom = true
n_layers = 1
base_width = 2
width_step = 0
penultimate_width = 4
[train]
epochs = 1
batch_size = 64
[data]
source = "cd"
)";

}  // namespace

TEST(Cli, UsageErrors) {
  EXPECT_NE(run("").code, 0);
  const auto bad = run("gen-stimuli --out /tmp/x --no-such-flag");
  EXPECT_NE(bad.code, 0);
  EXPECT_NE(bad.output.find("no-such-flag"), std::string::npos) << bad.output;
  EXPECT_NE(run("frobnicate").code, 0);
  EXPECT_NE(run("gen-stimuli").code, 0);  // --out is required
  EXPECT_NE(run("gen-stimuli --out /tmp/x --format jpeg").code, 0);
  const auto v = run("--version");
  EXPECT_EQ(v.code, 0);
  EXPECT_FALSE(v.output.empty());
}

TEST(Cli, GenStimuliIsDeterministicAndGuarded) {
  const auto base = temp_dir("gen");
  const auto a = run("gen-stimuli --out " + (base / "a").string() + " --format raw --seed 9");
  ASSERT_EQ(a.code, 0) << a.output;
  EXPECT_EQ(lines(base / "a" / "triples.csv"), 769u);
  EXPECT_EQ(lines(base / "a" / "stimuli.csv"), 993u);
  EXPECT_TRUE(fs::exists(base / "a" / "manifest.json"));
  const auto m = gcl::report::read_manifest(base / "a" / "manifest.json");
  EXPECT_TRUE(gcl::report::verify_outputs(base / "a", m).empty());

  ASSERT_EQ(run("gen-stimuli --out " + (base / "b").string() + " --format raw --seed 9").code, 0);
  EXPECT_EQ(slurp(base / "a" / "triples.csv"), slurp(base / "b" / "triples.csv"));
  EXPECT_EQ(slurp(base / "a" / "stimuli.csv"), slurp(base / "b" / "stimuli.csv"));

  const auto again = run("gen-stimuli --out " + (base / "a").string() + " --format raw");
  EXPECT_EQ(again.code, 1);
  EXPECT_NE(again.output.find("--force"), std::string::npos) << again.output;
  EXPECT_EQ(run("gen-stimuli --out " + (base / "a").string() + " --format raw --force --seed 9").code, 0);
  EXPECT_EQ(slurp(base / "a" / "triples.csv"), slurp(base / "b" / "triples.csv"));
}

TEST(Cli, TrainClosureReport) {
  const auto base = temp_dir("pipeline");
  write(base / "train.toml", kTinyTrain);
  const auto t = run("train --config " + (base / "train.toml").string() + " --out " + (base / "model").string());
  ASSERT_EQ(t.code, 0) << t.output;
  const auto ckpt = base / "model" / "model.ckpt";
  ASSERT_TRUE(fs::exists(ckpt));
  EXPECT_TRUE(fs::exists(base / "model" / "train.csv"));

  // A layer the net does not have fails and lists the valid names; nothing is written.
  const auto bad = run("closure --checkpoint " + ckpt.string() + " --layers conv2d_9 --out " +
                       (base / "bad").string());
  EXPECT_NE(bad.code, 0);
  EXPECT_NE(bad.output.find("conv2d_9"), std::string::npos) << bad.output;
  EXPECT_NE(bad.output.find("conv2d_1"), std::string::npos) << bad.output;
  EXPECT_NE(bad.output.find("fc_finale"), std::string::npos) << bad.output;
  EXPECT_FALSE(fs::exists(base / "bad" / "records.csv"));

  const auto c = run("closure --checkpoint " + ckpt.string() + " --layers all --model-id tiny --resamples 50 --out " +
                     (base / "clos").string());
  ASSERT_EQ(c.code, 0) << c.output;
  const auto recs = gcl::closure::read_records_csv(base / "clos" / "records.csv");
  EXPECT_EQ(recs.size(), 768u * 2u);  // conv2d_1, fc_finale
  const auto curves = gcl::closure::read_curves_csv(base / "clos" / "curves.csv");
  EXPECT_EQ(curves.size(), 2u);
  EXPECT_TRUE(fs::exists(base / "clos" / "plots" / "closure.svg"));

  const auto r = run("report --curves " + (base / "clos" / "curves.csv").string() + " --title tiny --out " +
                     (base / "rep").string());
  ASSERT_EQ(r.code, 0) << r.output;
  const auto svg = slurp(base / "rep" / "plots" / "closure.svg");
  EXPECT_NE(svg.find(">tiny</text>"), std::string::npos);

  EXPECT_NE(run("report --out " + (base / "rep2").string()).code, 0);
  EXPECT_NE(run("closure --checkpoint " + (base / "nope.ckpt").string() + " --out " + (base / "x").string()).code, 0);
}

TEST(Cli, ConfigErrorsExitWithTwo) {
  const auto base = temp_dir("config");
  write(base / "plan.toml", "kind = \"WhiteNoise\"\nreplication = 3\n");
  const auto r = run("experiment --plan " + (base / "plan.toml").string() + " --out " + (base / "out").string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find("replication: unknown field"), std::string::npos) << r.output;

  write(base / "train.toml", "seed = 1\n[data]\nsource = \"cats\"\n");
  const auto t = run("train --config " + (base / "train.toml").string() + " --out " + (base / "t").string());
  EXPECT_EQ(t.code, 2);
  EXPECT_NE(t.output.find("data.source"), std::string::npos) << t.output;

  // Natural-data plans need a data root.
  write(base / "noroot.toml", "kind = \"Untrained\"\n");
  const auto n = run("experiment --plan " + (base / "noroot.toml").string() + " --out " + (base / "n").string());
  EXPECT_EQ(n.code, 2);
  EXPECT_NE(n.output.find("data.root"), std::string::npos) << n.output;
}

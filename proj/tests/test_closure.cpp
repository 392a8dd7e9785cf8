#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include <gtest/gtest.h>

#include "gcl/closure/curve.hpp"
#include "gcl/closure/io.hpp"
#include "gcl/closure/records.hpp"
#include "gcl/stats/ttest.hpp"

using namespace gcl;
using namespace gcl::closure;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  auto d = fs::temp_directory_path() / ("gcl_test_closure_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

nn::NetConfig stimulus_net() {
  nn::NetConfig c;
  c.custom = true;
  c.n_layers = 1;
  c.n_classes = 2;
  c.head = nn::HeadKind::Sigmoid;
  c.base_width = 2;
  c.penultimate_width = 6;
  return c;
}

// Synthetic records: C = slope * edge + noise, n per edge length.
std::vector<ClosureRecord> synthetic(const std::string& model, double slope, double noise, int per_edge,
                                     std::uint64_t seed, double offset = 0.0) {
  std::mt19937_64 eng(seed);
  std::normal_distribution<double> n(0, noise);
  std::vector<ClosureRecord> out;
  std::size_t idx = 0;
  for (int e : stimulus::kEdgeLengths)
    for (int k = 0; k < per_edge; ++k) {
      ClosureRecord r;
      r.model_id = model;
      r.layer = "fc_finale";
      r.triple_index = idx++;
      r.edge_length = e;
      r.c = offset + slope * e + n(eng);
      r.s_ac = 0.5 + r.c / 2;
      r.s_dc = 0.5 - r.c / 2;
      out.push_back(r);
    }
  return out;
}

long double brute_cosine(const Tensor<double>& a, const Tensor<double>& b) {
  long double d = 0, x = 0, y = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    d += (long double)a[i] * b[i];
    x += (long double)a[i] * a[i];
    y += (long double)b[i] * b[i];
  }
  return d / std::sqrt(x * y);
}

}  // namespace

// Streaming evaluation, the cached-embedding route, and a direct brute-force
// forward pass all agree.
TEST(ClosureRecords, StreamingMatchesCachedAndBruteForce) {
  nn::Network<double> net(stimulus_net(), 3);
  const auto all = stimulus::build_triples(1);
  std::vector<std::size_t> pick;
  for (std::size_t i = 0; i < all.size(); i += 37) pick.push_back(i);
  const auto triples = select_triples(all, pick);
  const std::vector<std::string> layers{"fc_finale", "conv2d_1"};

  const auto streamed = closure_records(net, triples, layers, "m", {}, 7);
  ASSERT_EQ(streamed.size(), 2 * triples.size());

  const auto emb = embed_stimuli(net, layers, stimulus::enumerate_specs(), "m");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto cached = closure_per_triple(emb, triples, layers[l]);
    for (std::size_t k = 0; k < triples.size(); ++k) {
      const auto& s = streamed[l * triples.size() + k];
      EXPECT_EQ(s.layer, layers[l]);
      EXPECT_EQ(s.triple_index, triples[k].index);
      EXPECT_NEAR(s.c, cached[k].c, 1e-12);
    }
  }

  for (std::size_t k = 0; k < 4; ++k) {
    const auto& t = triples[k];
    auto act = [&](const stimulus::StimulusSpec& spec) {
      const auto img = stimulus::render(spec);
      return net.forward(training::make_batch<double>({&img}), {"fc_finale"}).activations.at("fc_finale");
    };
    const auto c = act(t.complete), a = act(t.aligned), d = act(t.disordered);
    const double ref = static_cast<double>(brute_cosine(a, c) - brute_cosine(d, c));
    EXPECT_NEAR(streamed[k].c, ref, 1e-8);
    EXPECT_NEAR(streamed[k].c, streamed[k].s_ac - streamed[k].s_dc, 1e-15);
  }
}

TEST(ClosureRecords, TripleOrderDoesNotChangeValues) {
  nn::Network<float> net(stimulus_net(), 4);
  auto triples = select_triples(stimulus::build_triples(2), {5, 100, 300, 700, 767});
  const auto a = closure_records(net, triples, {"fc_finale"}, "m");
  std::reverse(triples.begin(), triples.end());
  const auto b = closure_records(net, triples, {"fc_finale"}, "m");
  for (std::size_t k = 0; k < a.size(); ++k) EXPECT_EQ(a[k].c, b[a.size() - 1 - k].c);
}

TEST(ClosureRecords, ErrorsAndBounds) {
  nn::Network<float> net(stimulus_net(), 4);
  const auto triples = select_triples(stimulus::build_triples(2), {0, 1});
  EXPECT_THROW(closure_records(net, {}, {"fc_finale"}, "m"), Error);
  EXPECT_THROW(closure_records(net, triples, {}, "m"), Error);
  EXPECT_THROW(closure_records(net, triples, {"fc_finale", "fc_finale"}, "m"), Error);
  EXPECT_THROW(closure_records(net, triples, {"conv9"}, "m"), Error);
  for (const auto& r : closure_records(net, triples, {"conv2d_1", "fc_finale"}, "m")) {
    EXPECT_GE(r.c, -2.0);
    EXPECT_LE(r.c, 2.0);
  }
  std::vector<Embedding> none;
  EXPECT_THROW(closure_per_triple(none, triples, "fc_finale"), Error);
}

TEST(ClosureRecords, ZeroNormFlag) {
  const auto t = stimulus::build_triples(0).front();
  const auto r = make_record(t, {0.0, true}, {0.4, false}, "l", "m");
  EXPECT_TRUE(r.zero_norm);
  EXPECT_DOUBLE_EQ(r.c, -0.4);
  EXPECT_FALSE(outside_unit_range(r));
  const auto wide = make_record(t, {0.9, false}, {-0.5, false}, "l", "m");
  EXPECT_TRUE(outside_unit_range(wide));
}

TEST(ClosureCurve, MeansAndPermutationInvariance) {
  auto recs = synthetic("m", 0.01, 0.05, 20, 1);
  const auto curve = closure_curve(recs);
  ASSERT_EQ(curve.points.size(), 6u);
  for (std::size_t i = 0; i < 6; ++i) {
    double s = 0;
    for (std::size_t k = 0; k < 20; ++k) s += recs[i * 20 + k].c;
    EXPECT_NEAR(curve.points[i].mean, s / 20, 1e-12);
    EXPECT_EQ(curve.points[i].n, 20u);
    EXPECT_LT(curve.points[i].ci_lo, curve.points[i].mean);
    EXPECT_GT(curve.points[i].ci_hi, curve.points[i].mean);
  }
  std::shuffle(recs.begin(), recs.end(), std::mt19937_64(3));
  const auto again = closure_curve(recs);
  for (std::size_t i = 0; i < 6; ++i) {
    EXPECT_EQ(again.points[i].mean, curve.points[i].mean);
    EXPECT_EQ(again.points[i].ci_lo, curve.points[i].ci_lo);
  }
}

TEST(ClosureCurve, TIntervalOption) {
  const auto recs = synthetic("m", 0.0, 0.1, 10, 2);
  CiOptions ci;
  ci.method = CiMethod::TInterval;
  const auto curve = closure_curve(recs, ci);
  std::vector<double> xs;
  for (std::size_t k = 0; k < 10; ++k) xs.push_back(recs[k].c);
  const auto iv = stats::t_interval(xs);
  EXPECT_NEAR(curve.points[0].ci_lo, iv.lo, 1e-12);
  EXPECT_NEAR(curve.points[0].ci_hi, iv.hi, 1e-12);
  EXPECT_EQ(parse_ci_method("t"), CiMethod::TInterval);
  EXPECT_THROW(parse_ci_method("jackknife"), Error);
}

TEST(ClosureCurve, BootstrapCoverageRoughlyNominal) {
  // Mean-zero data: the 95% interval should cover 0 in most of 200 repeats.
  int covered = 0;
  for (int rep = 0; rep < 200; ++rep) {
    const auto recs = synthetic("m", 0.0, 1.0, 40, 100 + rep);
    CiOptions ci;
    ci.seed = rep;
    ci.resamples = 400;
    covered += closure_curve(recs, ci).points[2].ci_lo <= 0 && closure_curve(recs, ci).points[2].ci_hi >= 0;
  }
  EXPECT_GT(covered, 175);
  EXPECT_LT(covered, 200);
}

TEST(ClosureCurve, SingleRecordHasUndefinedInterval) {
  auto recs = synthetic("m", 0.0, 0.1, 1, 2);
  const auto curve = closure_curve(recs);
  EXPECT_FALSE(curve.points[0].ci_defined);
  EXPECT_EQ(curve.points[0].ci_lo, curve.points[0].mean);
}

TEST(ClosureCurve, Errors) {
  EXPECT_THROW(closure_curve({}), Error);
  auto recs = synthetic("m", 0.0, 0.1, 3, 2);
  auto missing = recs;
  missing.erase(std::remove_if(missing.begin(), missing.end(), [](auto& r) { return r.edge_length == 18; }),
                missing.end());
  EXPECT_THROW(closure_curve(missing), Error);
  auto mixed = recs;
  mixed[4].model_id = "other";
  EXPECT_THROW(closure_curve(mixed), Error);
  auto bad_edge = recs;
  bad_edge[0].edge_length = 4;
  EXPECT_THROW(closure_curve(bad_edge), Error);
}

TEST(ClosureCurve, PooledAndGrouped) {
  auto a = synthetic("r0", 0.01, 0.05, 10, 1);
  auto b = synthetic("r1", 0.01, 0.05, 10, 2);
  auto all = a;
  all.insert(all.end(), b.begin(), b.end());
  const auto pooled = pooled_curve(all, "cond");
  EXPECT_EQ(pooled.model_id, "cond");
  EXPECT_EQ(pooled.points[0].n, 20u);
  const auto curves = closure_curves(all);
  ASSERT_EQ(curves.size(), 2u);
  EXPECT_NEAR(pooled.points[3].mean, 0.5 * (curves[0].points[3].mean + curves[1].points[3].mean), 1e-12);
}

TEST(Slope, OlsHandValues) {
  EXPECT_DOUBLE_EQ(ols_slope({0, 1, 2}, {1, 3, 5}), 2.0);
  EXPECT_NEAR(ols_slope({1, 2, 3, 4}, {2, 1, 4, 3}), 0.6, 1e-15);
  EXPECT_THROW(ols_slope({1, 1}, {1, 2}), Error);
  EXPECT_THROW(ols_slope({1}, {1}), Error);
}

TEST(Slope, BootstrapSeparatesIncreasingFromFlat) {
  const auto rising = bootstrap_slope(synthetic("m", 0.01, 0.05, 32, 1), 1000, 1);
  EXPECT_NEAR(rising.slope, 0.01, 0.002);
  EXPECT_TRUE(rising.excludes_zero());
  int covered = 0;
  for (int rep = 0; rep < 100; ++rep) covered += bootstrap_slope(synthetic("m", 0.0, 0.05, 32, 50 + rep), 500, rep).includes_zero();
  EXPECT_GE(covered, 88);
  // Deterministic in the seed and independent of record order.
  auto recs = synthetic("m", 0.003, 0.05, 32, 3);
  const auto s1 = bootstrap_slope(recs, 500, 9);
  std::reverse(recs.begin(), recs.end());
  const auto s2 = bootstrap_slope(recs, 500, 9);
  EXPECT_EQ(s1.lo, s2.lo);
  EXPECT_EQ(s1.hi, s2.hi);
}

TEST(Slope, ReplicationSlopeIsTOverPerModelSlopes) {
  std::vector<ClosureRecord> all;
  std::vector<double> per;
  for (int r = 0; r < 5; ++r) {
    auto recs = synthetic("r" + std::to_string(r), 0.004 + 0.001 * r, 0.05, 8, 10 + r);
    std::vector<double> x, y;
    for (const auto& rec : recs) {
      x.push_back(rec.edge_length);
      y.push_back(rec.c);
    }
    per.push_back(ols_slope(x, y));
    all.insert(all.end(), recs.begin(), recs.end());
  }
  const auto est = replication_slope(all);
  const auto iv = stats::t_interval(per);
  EXPECT_EQ(est.n, 5u);
  EXPECT_NEAR(est.slope, iv.estimate, 1e-15);
  EXPECT_NEAR(est.lo, iv.lo, 1e-15);
  EXPECT_NEAR(est.hi, iv.hi, 1e-15);
  EXPECT_FALSE(replication_slope(synthetic("only", 0.01, 0.05, 4, 1)).ci_defined);
}

TEST(ClosureIo, RecordsRoundTripExactly) {
  const auto dir = temp_dir("records");
  const auto recs = synthetic("m", 0.01, 0.05, 5, 1);
  write_records_csv(dir / "r.csv", recs);
  const auto back = read_records_csv(dir / "r.csv");
  ASSERT_EQ(back.size(), recs.size());
  for (std::size_t i = 0; i < recs.size(); ++i) {
    EXPECT_EQ(back[i].c, recs[i].c);
    EXPECT_EQ(back[i].s_ac, recs[i].s_ac);
    EXPECT_EQ(back[i].triple_index, recs[i].triple_index);
  }
  write_records_csv(dir / "r2.csv", back);
  std::ifstream a(dir / "r.csv"), b(dir / "r2.csv");
  EXPECT_EQ(std::string(std::istreambuf_iterator<char>(a), {}), std::string(std::istreambuf_iterator<char>(b), {}));
}

TEST(ClosureIo, CurvesRoundTripAndUndefinedIntervals) {
  const auto dir = temp_dir("curves");
  std::vector<ClosureCurve> curves{closure_curve(synthetic("a", 0.01, 0.05, 5, 1)),
                                   closure_curve(synthetic("b", 0.0, 0.05, 1, 2))};
  write_curves_csv(dir / "c.csv", curves);
  const auto back = read_curves_csv(dir / "c.csv");
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].points[2].ci_hi, curves[0].points[2].ci_hi);
  EXPECT_FALSE(back[1].points[0].ci_defined);
  EXPECT_EQ(back[1].at(29).mean, curves[1].at(29).mean);
}

TEST(ClosureIo, Errors) {
  const auto dir = temp_dir("io_errors");
  EXPECT_THROW(read_records_csv(dir / "none.csv"), IoError);
  std::ofstream(dir / "bad.csv") << kRecordsHeader << "\nm,l,0,3,0.1,0.2\n";
  EXPECT_THROW(read_records_csv(dir / "bad.csv"), IoError);
  std::ofstream(dir / "nan.csv") << kRecordsHeader << "\nm,l,0,3,0.1,0.2,abc\n";
  EXPECT_THROW(read_records_csv(dir / "nan.csv"), IoError);
  std::ofstream(dir / "hdr.csv") << "x,y\n";
  EXPECT_THROW(read_curves_csv(dir / "hdr.csv"), IoError);
  std::ofstream(dir / "empty.csv") << kCurvesHeader << "\n";
  EXPECT_THROW(read_curves_csv(dir / "empty.csv"), IoError);
}

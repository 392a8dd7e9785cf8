#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include <gtest/gtest.h>

#include "gcl/nn/checkpoint.hpp"
#include "gcl/nn/network.hpp"
#include "gcl/nn/rmsprop.hpp"
#include "grad_check.hpp"

using namespace gcl;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  auto d = fs::temp_directory_path() / ("gcl_test_nn_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

template <class T>
Tensor<T> random_batch(const nn::NetConfig& c, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 eng(seed);
  std::uniform_real_distribution<double> u(-1, 1);
  Tensor<T> b({n, static_cast<std::size_t>(c.input_height), static_cast<std::size_t>(c.input_width),
               static_cast<std::size_t>(c.input_channels)});
  for (auto& v : b.values()) v = static_cast<T>(u(eng));
  return b;
}

nn::NetConfig tiny_conv() {
  nn::NetConfig c;
  c.custom = true;
  c.n_layers = 2;
  c.n_classes = 3;
  c.base_width = 2;
  c.width_step = 1;
  c.penultimate_width = 5;
  c.input_height = 8;
  c.input_width = 8;
  return c;
}

}  // namespace

TEST(GradientCheck, RandomizedNetworks) {
  std::mt19937_64 eng(2024);
  int conv = 0, fc = 0, sig = 0, soft = 0;
  for (int i = 0; i < 120; ++i) {
    const auto cfg = gradcheck::random_small_config(eng);
    const auto r = gradcheck::check_network_gradients(cfg, 1000 + i);
    EXPECT_LT(r.max_rel_error, 1e-4) << "config " << i << " (" << r.description << ") worst " << r.worst;
    EXPECT_GT(r.checked, 0u);
    (cfg.kind == nn::NetKind::Conv ? conv : fc)++;
    (cfg.head == nn::HeadKind::Sigmoid ? sig : soft)++;
  }
  // Every architectural piece is exercised.
  EXPECT_GT(conv, 20);
  EXPECT_GT(fc, 20);
  EXPECT_GT(sig, 20);
  EXPECT_GT(soft, 20);
}

TEST(GradientCheck, ConvLayer) {
  for (std::size_t k : {1u, 3u, 5u})
    for (auto act : {nn::Activation::Relu, nn::Activation::None}) {
      nn::Conv2d<double> conv("c", 2, 3, k, act);
      const auto r = gradcheck::check_layer_gradients(conv, {2, 2, 5, 6}, 17 + k);
      EXPECT_LT(r.max_rel_error, 1e-4) << "k=" << k << " worst " << r.worst;
    }
}

TEST(GradientCheck, PoolDenseFlatten) {
  nn::MaxPool2d<double> pool("p");
  EXPECT_LT(gradcheck::check_layer_gradients(pool, {2, 3, 6, 5}, 3).max_rel_error, 1e-4);
  nn::Dense<double> dense("d", 7, 4);
  EXPECT_LT(gradcheck::check_layer_gradients(dense, {3, 7}, 4).max_rel_error, 1e-4);
  nn::Dense<double> linear("l", 5, 2, nn::Activation::None);
  EXPECT_LT(gradcheck::check_layer_gradients(linear, {4, 5}, 5).max_rel_error, 1e-4);
  nn::Flatten<double> flat("f");
  EXPECT_LT(gradcheck::check_layer_gradients(flat, {2, 2, 3, 3}, 6).max_rel_error, 1e-4);
}

// Direct (non-im2col) convolution as an oracle for the forward pass.
TEST(Conv2d, MatchesDirectConvolution) {
  const std::size_t n = 2, cin = 3, cout = 4, h = 7, w = 5, k = 3;
  nn::Conv2d<double> conv("c", cin, cout, k, nn::Activation::None);
  Engine eng = make_engine(9);
  conv.init(eng);
  auto params = conv.params();
  for (auto& v : params[1].value->values()) v = uniform(eng, -1, 1);
  Tensor<double> in({n, cin, h, w});
  for (auto& v : in.values()) v = uniform(eng, -1, 1);
  Tensor<double> out;
  conv.forward(in, out);
  ASSERT_EQ(out.shape(), (Shape{n, cout, h, w}));
  const auto& W = *params[0].value;
  const auto& B = *params[1].value;
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t o = 0; o < cout; ++o)
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
          double s = B[o];
          for (std::size_t c = 0; c < cin; ++c)
            for (std::size_t dy = 0; dy < k; ++dy)
              for (std::size_t dx = 0; dx < k; ++dx) {
                const long yy = long(y + dy) - 1, xx = long(x + dx) - 1;
                if (yy < 0 || xx < 0 || yy >= long(h) || xx >= long(w)) continue;
                s += W[o * cin * k * k + (c * k + dy) * k + dx] * in[((b * cin + c) * h + yy) * w + xx];
              }
          EXPECT_NEAR(out[((b * cout + o) * h + y) * w + x], s, 1e-12);
        }
}

TEST(MaxPool2d, OddSizesFloor) {
  nn::MaxPool2d<double> pool("p");
  EXPECT_EQ(pool.output_shape({2, 5, 7}), (Shape{2, 2, 3}));
  EXPECT_THROW(pool.output_shape({2, 1, 7}), Error);
  Tensor<double> in({1, 1, 2, 2}, std::vector<double>{1, 4, 3, 2});
  Tensor<double> out;
  pool.forward(in, out);
  EXPECT_EQ(out[0], 4);
}

TEST(Network, LayerNamesAndShapes) {
  nn::Network<float> net(nn::NetConfig{}, 1);
  EXPECT_EQ(net.probe_layers(), (std::vector<std::string>{"conv2d_1", "conv2d_2", "conv2d_3", "fc_finale"}));
  EXPECT_EQ(net.layer_width("fc_finale"), 512u);
  EXPECT_EQ(net.layer_width("conv2d_1"), 16u * 150 * 150);
  EXPECT_EQ(net.layer_width("conv2d_3"), 48u * 37 * 37);
  nn::NetConfig fc;
  fc.kind = nn::NetKind::FullyConnected;
  nn::Network<float> fnet(fc, 1);
  EXPECT_EQ(fnet.probe_layers(), (std::vector<std::string>{"dense_1", "dense_2", "dense_3", "fc_finale"}));
  EXPECT_EQ(fnet.layer_width("dense_2"), 32u);
}

TEST(Network, UnknownLayerListsValidNames) {
  nn::Network<double> net(tiny_conv(), 1);
  auto batch = random_batch<double>(net.config(), 1, 1);
  try {
    net.forward(batch, {"nope"});
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("conv2d_1"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("fc_finale"), std::string::npos);
  }
}

TEST(Network, HeadsAreDistributions) {
  auto c = tiny_conv();
  nn::Network<double> net(c, 3);
  auto out = net.forward(random_batch<double>(c, 4, 2), {"fc_finale", "conv2d_2"});
  for (std::size_t b = 0; b < 4; ++b) {
    double s = 0;
    for (double v : out.head.row(b)) s += v;
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
  EXPECT_EQ(out.activations.at("fc_finale").shape(), (Shape{4, 5}));
  EXPECT_EQ(out.activations.at("conv2d_2").shape(), (Shape{4, 3 * 4 * 4}));
  for (double v : out.activations.at("fc_finale").values()) EXPECT_GE(v, 0.0);

  c.head = nn::HeadKind::Sigmoid;
  c.n_classes = 2;
  nn::Network<double> bin(c, 3);
  auto o2 = bin.forward(random_batch<double>(c, 4, 2));
  EXPECT_EQ(o2.head.shape(), (Shape{4, 1}));
  for (double v : o2.head.values()) {
    EXPECT_GT(v, 0.0);
    EXPECT_LT(v, 1.0);
  }
}

TEST(Network, SameSeedSameWeights) {
  nn::Network<float> a(tiny_conv(), 42), b(tiny_conv(), 42), c(tiny_conv(), 43);
  auto pa = a.params(), pb = b.params(), pc = c.params();
  EXPECT_TRUE(*pa[0].value == *pb[0].value);
  EXPECT_FALSE(*pa[0].value == *pc[0].value);
}

TEST(Network, RejectsBadConfigs) {
  nn::NetConfig c;
  c.n_layers = 4;
  EXPECT_THROW(nn::Network<float>(c, 1), Error);
  c = tiny_conv();
  c.head = nn::HeadKind::Sigmoid;
  EXPECT_THROW(nn::Network<float>(c, 1), Error);
  c = tiny_conv();
  c.n_layers = 4;
  EXPECT_THROW(nn::Network<float>(c, 1), Error);
  nn::Network<double> net(tiny_conv(), 1);
  Tensor<double> wrong({1, 5, 5, 3});
  EXPECT_THROW(net.forward(wrong), Error);
  Tensor<double> targets({2, 3});
  EXPECT_THROW(net.backward(random_batch<double>(tiny_conv(), 1, 1), targets, nn::LossKind::CrossEntropy), Error);
}

TEST(Network, NormalizationAppliedPerChannel) {
  auto c = tiny_conv();
  nn::Network<double> a(c, 5), b(c, 5);
  b.normalization().mean = {0.5, 0.5, 0.5};
  b.normalization().stddev = {2, 2, 2};
  auto x = random_batch<double>(c, 2, 8);
  Tensor<double> shifted = x;
  for (auto& v : shifted.values()) v = (v - 0.5) / 2;
  const auto pa = a.forward(shifted, {"fc_finale"}).activations.at("fc_finale");
  const auto pb = b.forward(x, {"fc_finale"}).activations.at("fc_finale");
  for (std::size_t i = 0; i < pa.size(); ++i) EXPECT_NEAR(pa[i], pb[i], 1e-12);
}

TEST(RmsProp, MatchesHandUpdate) {
  Tensor<double> v({2}, std::vector<double>{1.0, -2.0}), g({2}, std::vector<double>{0.5, -0.1});
  std::vector<nn::ParamRef<double>> params{{"p", &v, &g}};
  nn::RmsProp<double> opt({0.01, 0.9, 1e-8});
  opt.step(params);
  double a0 = 0.1 * 0.25, a1 = 0.1 * 0.01;
  EXPECT_NEAR(v[0], 1.0 - 0.01 * 0.5 / (std::sqrt(a0) + 1e-8), 1e-15);
  EXPECT_NEAR(v[1], -2.0 + 0.01 * 0.1 / (std::sqrt(a1) + 1e-8), 1e-15);
  const double v0 = v[0];
  opt.step(params);
  a0 = 0.9 * a0 + 0.1 * 0.25;
  EXPECT_NEAR(v[0], v0 - 0.01 * 0.5 / (std::sqrt(a0) + 1e-8), 1e-15);
  EXPECT_EQ(opt.steps(), 2u);
  g[0] = std::nan("");
  EXPECT_THROW(opt.step(params), NumericError);
}

TEST(RmsProp, TrainingReducesLoss) {
  auto c = tiny_conv();
  nn::Network<double> net(c, 11);
  auto x = random_batch<double>(c, 6, 12);
  Tensor<double> t({6, 3});
  for (std::size_t b = 0; b < 6; ++b) t[b * 3 + b % 3] = 1;
  nn::RmsProp<double> opt({1e-2, 0.9, 1e-8});
  const double first = net.backward(x, t, nn::LossKind::CrossEntropy);
  double last = first;
  for (int i = 0; i < 60; ++i) {
    last = net.backward(x, t, nn::LossKind::CrossEntropy);
    opt.step(net.params());
  }
  EXPECT_LT(last, 0.5 * first);
}

template <class T>
void checkpoint_round_trip() {
  auto c = tiny_conv();
  nn::Network<T> net(c, 21);
  net.normalization().mean = {0.1, 0.2, 0.3};
  net.normalization().stddev = {1.1, 1.2, 1.3};
  nn::RmsProp<T> opt;
  Tensor<T> t({2, 3});
  t[0] = t[5] = 1;
  auto x = random_batch<T>(c, 2, 4);
  net.backward(x, t, nn::LossKind::CrossEntropy);
  opt.step(net.params());
  const auto dir = temp_dir(nn::dtype_name<T>());
  nn::save_checkpoint(dir / "m.ckpt", net, &opt, 7);
  auto ck = nn::load_checkpoint<T>(dir / "m.ckpt");
  EXPECT_EQ(ck.epoch, 7);
  EXPECT_EQ(ck.net.config(), c);
  EXPECT_EQ(ck.net.normalization(), net.normalization());
  EXPECT_EQ(ck.optimizer.steps(), 1u);
  auto a = net.params(), b = ck.net.params();
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_TRUE(*a[i].value == *b[i].value) << a[i].name;
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_TRUE(opt.accumulators()[i] == ck.optimizer.accumulators()[i]);
  EXPECT_TRUE(net.forward(x).head == ck.net.forward(x).head);
}

TEST(Checkpoint, RoundTripF32) { checkpoint_round_trip<float>(); }
TEST(Checkpoint, RoundTripF64) { checkpoint_round_trip<double>(); }

TEST(Checkpoint, Errors) {
  const auto dir = temp_dir("errors");
  nn::Network<float> net(tiny_conv(), 1);
  nn::save_checkpoint<float>(dir / "m.ckpt", net, nullptr, 0);
  EXPECT_THROW(nn::load_checkpoint<double>(dir / "m.ckpt"), IoError);
  EXPECT_THROW(nn::load_checkpoint<float>(dir / "missing.ckpt"), IoError);
  {
    std::ofstream(dir / "junk.ckpt") << "not a checkpoint at all";
  }
  EXPECT_THROW(nn::load_checkpoint<float>(dir / "junk.ckpt"), IoError);
  fs::resize_file(dir / "m.ckpt", fs::file_size(dir / "m.ckpt") - 8);
  EXPECT_THROW(nn::load_checkpoint<float>(dir / "m.ckpt"), IoError);
}

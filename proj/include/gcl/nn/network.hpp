#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "gcl/core/error.hpp"
#include "gcl/core/rng.hpp"
#include "gcl/core/tensor.hpp"
#include "gcl/nn/config.hpp"
#include "gcl/nn/layers.hpp"

namespace gcl::nn {

enum class LossKind { CrossEntropy, BinaryCrossEntropy };

inline LossKind loss_for(HeadKind h) {
  return h == HeadKind::Softmax ? LossKind::CrossEntropy : LossKind::BinaryCrossEntropy;
}

/// Per-channel input standardisation applied before the first layer.
/// Identity by default; training with feature-wise normalisation fills it
/// from the training split.
struct Normalization {
  std::vector<double> mean;
  std::vector<double> stddev;

  bool identity() const { return mean.empty(); }
  friend bool operator==(const Normalization&, const Normalization&) = default;
};

template <class T>
struct ForwardOutput {
  /// [N, head_units]: softmax rows or sigmoid values.
  Tensor<T> head;
  /// Requested layers, post-nonlinearity, flattened to [N, m].
  std::map<std::string, Tensor<T>> activations;
};

template <class T>
struct BackwardResult {
  T loss{};
  /// Same order as Network::params().
  std::vector<Tensor<T>> gradients;
};

/// Layer stack for the simple ConvNet / FCNet family.
///
/// Conv: n_layers x (conv2d_k -> ReLU -> max_pooling2d_k), flatten,
/// fc_finale (512, ReLU), predictions.
/// FC: flatten, n_layers x dense_k (ReLU), fc_finale (512, ReLU), predictions.
template <class T>
class Network {
 public:
  Network(NetConfig config, std::uint64_t seed) : config_(std::move(config)), seed_(seed) {
    validate(config_);
    const auto in_c = static_cast<std::size_t>(config_.input_channels);
    const auto in_h = static_cast<std::size_t>(config_.input_height);
    const auto in_w = static_cast<std::size_t>(config_.input_width);
    Shape shape;
    if (config_.kind == NetKind::Conv) {
      shape = {in_c, in_h, in_w};
      for (int i = 0; i < config_.n_layers; ++i) {
        const auto k = std::to_string(i + 1);
        add(std::make_unique<Conv2d<T>>("conv2d_" + k, shape[0],
                                        static_cast<std::size_t>(config_.width(i))),
            shape, true);
        add(std::make_unique<MaxPool2d<T>>("max_pooling2d_" + k), shape, false);
      }
      add(std::make_unique<Flatten<T>>("flatten"), shape, false);
    } else {
      shape = {in_h * in_w * in_c};
      for (int i = 0; i < config_.n_layers; ++i)
        add(std::make_unique<Dense<T>>("dense_" + std::to_string(i + 1), shape[0],
                                       static_cast<std::size_t>(config_.width(i))),
            shape, true);
    }
    add(std::make_unique<Dense<T>>("fc_finale", shape[0],
                                   static_cast<std::size_t>(config_.penultimate_width)),
        shape, true);
    add(std::make_unique<Dense<T>>("predictions", shape[0],
                                   static_cast<std::size_t>(config_.head_units()),
                                   Activation::None),
        shape, false);
    acts_.resize(layers_.size() + 1);
    grads_.resize(2);

    Engine eng = make_engine(derive_seed(seed, {0x1A17}));
    for (auto& l : layers_) l->init(eng);
  }

  Network(const Network&) = delete;
  Network& operator=(const Network&) = delete;
  Network(Network&&) = default;
  Network& operator=(Network&&) = default;

  const NetConfig& config() const { return config_; }
  std::uint64_t seed() const { return seed_; }
  Normalization& normalization() { return norm_; }
  const Normalization& normalization() const { return norm_; }

  /// Every recordable layer name, input to output.
  std::vector<std::string> layer_names() const {
    std::vector<std::string> out;
    for (const auto& l : layers_) out.push_back(l->name());
    return out;
  }

  /// Hidden representations probed for closure, shallow to deep:
  /// conv2d_1..conv2d_n (or dense_1..dense_n) then fc_finale.
  std::vector<std::string> probe_layers() const {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < layers_.size(); ++i)
      if (probe_[i]) out.push_back(layers_[i]->name());
    return out;
  }

  /// Flattened width of a named layer's output.
  std::size_t layer_width(const std::string& name) const {
    return shape_volume(out_shapes_.at(index_of(name)));
  }

  std::vector<ParamRef<T>> params() {
    std::vector<ParamRef<T>> out;
    for (auto& l : layers_)
      for (auto& p : l->params()) out.push_back(p);
    return out;
  }

  std::size_t parameter_count() {
    std::size_t n = 0;
    for (auto& p : params()) n += p.value->size();
    return n;
  }

  void zero_grad() {
    for (auto& p : params()) p.grad->fill(T(0));
  }

  /// Runs the batch ([N, H, W, C], values in [-1, 1]) through the network.
  ForwardOutput<T> forward(const Tensor<T>& batch, const std::set<std::string>& record = {}) {
    for (const auto& name : record) index_of(name);
    run_forward(batch);
    ForwardOutput<T> out;
    out.head = head_output();
    const std::size_t n = batch.dim(0);
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      if (!record.contains(layers_[i]->name())) continue;
      Tensor<T> a = acts_[i + 1];
      a.reshape({n, a.size() / n});
      out.activations.emplace(layers_[i]->name(), std::move(a));
    }
    return out;
  }

  /// Forward + backward. Parameter gradients (mean over the batch) are left
  /// in the ParamRef::grad tensors; returns the mean batch loss.
  T backward(const Tensor<T>& batch, const Tensor<T>& targets, LossKind loss) {
    check_targets(batch, targets, loss);
    zero_grad();
    run_forward(batch);
    const Tensor<T>& logits = acts_.back();
    Tensor<T>& g = grads_[0];
    g = Tensor<T>(logits.shape());
    const T value = loss == LossKind::CrossEntropy ? softmax_xent(logits, targets, g)
                                                   : sigmoid_bce(logits, targets, g);
    if (!std::isfinite(static_cast<double>(value)))
      throw NumericError("non-finite loss (" + std::to_string(static_cast<double>(value)) +
                         ") on batch of " + std::to_string(batch.dim(0)));
    for (std::size_t i = layers_.size(); i-- > 0;) {
      Tensor<T>& gin = grads_[(layers_.size() - i) % 2];
      // The first layer's input gradient is never needed.
      layers_[i]->backward(grads_[(layers_.size() - i - 1) % 2], i == 0 ? nullptr : &gin);
    }
    return value;
  }

  /// Head output for the most recent forward/backward batch.
  Tensor<T> cached_head() const { return head_output(); }

  /// Frees activation caches held for backward.
  void release() {
    for (auto& l : layers_) l->release();
    for (auto& a : acts_) a = Tensor<T>();
    for (auto& g : grads_) g = Tensor<T>();
  }

  /// Input preparation: standardisation, then NHWC -> NCHW (conv) or
  /// NHWC -> [N, H*W*C] (fc).
  Tensor<T> prepare_input(const Tensor<T>& batch) const {
    const auto h = static_cast<std::size_t>(config_.input_height);
    const auto w = static_cast<std::size_t>(config_.input_width);
    const auto c = static_cast<std::size_t>(config_.input_channels);
    if (batch.rank() != 4 || batch.dim(1) != h || batch.dim(2) != w || batch.dim(3) != c)
      throw Error("input batch shape " + shape_string(batch.shape()) + " does not match [N," +
                  std::to_string(h) + "," + std::to_string(w) + "," + std::to_string(c) + "]");
    const std::size_t n = batch.dim(0);
    std::vector<T> scale(c, T(1)), shift(c, T(0));
    if (!norm_.identity()) {
      if (norm_.mean.size() != c || norm_.stddev.size() != c)
        throw Error("normalization has wrong channel count");
      for (std::size_t k = 0; k < c; ++k) {
        scale[k] = static_cast<T>(1.0 / norm_.stddev[k]);
        shift[k] = static_cast<T>(-norm_.mean[k] / norm_.stddev[k]);
      }
    }
    Tensor<T> out;
    if (config_.kind == NetKind::Conv) {
      out = Tensor<T>({n, c, h, w});
      for (std::size_t b = 0; b < n; ++b)
        for (std::size_t y = 0; y < h; ++y)
          for (std::size_t x = 0; x < w; ++x)
            for (std::size_t k = 0; k < c; ++k)
              out[((b * c + k) * h + y) * w + x] =
                  batch[((b * h + y) * w + x) * c + k] * scale[k] + shift[k];
    } else {
      out = Tensor<T>({n, h * w * c});
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = batch[i] * scale[i % c] + shift[i % c];
    }
    return out;
  }

 private:
  void add(std::unique_ptr<Layer<T>> layer, Shape& shape, bool probe) {
    shape = layer->output_shape(shape);
    out_shapes_.push_back(shape);
    probe_.push_back(probe);
    layers_.push_back(std::move(layer));
  }

  std::size_t index_of(const std::string& name) const {
    for (std::size_t i = 0; i < layers_.size(); ++i)
      if (layers_[i]->name() == name) return i;
    std::string valid;
    for (const auto& l : layers_) valid += (valid.empty() ? "" : ", ") + l->name();
    throw Error("unknown layer '" + name + "' (valid: " + valid + ")");
  }

  void run_forward(const Tensor<T>& batch) {
    acts_[0] = prepare_input(batch);
    for (std::size_t i = 0; i < layers_.size(); ++i) layers_[i]->forward(acts_[i], acts_[i + 1]);
  }

  Tensor<T> head_output() const {
    Tensor<T> probs = acts_.back();
    const std::size_t n = probs.dim(0), k = probs.dim(1);
    if (config_.head == HeadKind::Sigmoid) {
      for (auto& v : probs.values()) v = sigmoid(v);
      return probs;
    }
    for (std::size_t b = 0; b < n; ++b) {
      auto row = probs.row(b);
      const T mx = *std::max_element(row.begin(), row.end());
      T sum = 0;
      for (auto& v : row) sum += (v = std::exp(v - mx));
      for (auto& v : row) v /= sum;
    }
    (void)k;
    return probs;
  }

  static T sigmoid(T z) {
    return z >= 0 ? T(1) / (T(1) + std::exp(-z)) : std::exp(z) / (T(1) + std::exp(z));
  }

  void check_targets(const Tensor<T>& batch, const Tensor<T>& targets, LossKind loss) const {
    const auto units = static_cast<std::size_t>(config_.head_units());
    if (targets.rank() != 2 || targets.dim(0) != batch.dim(0) || targets.dim(1) != units)
      throw Error("targets shape " + shape_string(targets.shape()) + " does not match head [" +
                  std::to_string(batch.dim(0)) + "," + std::to_string(units) + "]");
    if ((loss == LossKind::BinaryCrossEntropy) != (config_.head == HeadKind::Sigmoid))
      throw Error("loss does not match head kind");
  }

  static T softmax_xent(const Tensor<T>& logits, const Tensor<T>& targets, Tensor<T>& grad) {
    const std::size_t n = logits.dim(0), k = logits.dim(1);
    double total = 0;
    for (std::size_t b = 0; b < n; ++b) {
      auto z = logits.row(b);
      auto t = targets.row(b);
      auto g = grad.row(b);
      const T mx = *std::max_element(z.begin(), z.end());
      T sum = 0;
      for (std::size_t j = 0; j < k; ++j) sum += std::exp(z[j] - mx);
      const T lse = mx + std::log(sum);
      for (std::size_t j = 0; j < k; ++j) {
        if (t[j] != T(0)) total -= static_cast<double>(t[j] * (z[j] - lse));
        g[j] = (std::exp(z[j] - lse) - t[j]) / static_cast<T>(n);
      }
    }
    return static_cast<T>(total / static_cast<double>(n));
  }

  static T sigmoid_bce(const Tensor<T>& logits, const Tensor<T>& targets, Tensor<T>& grad) {
    const std::size_t n = logits.dim(0);
    double total = 0;
    for (std::size_t b = 0; b < n; ++b) {
      const T z = logits[b], t = targets[b];
      total += static_cast<double>(std::max(z, T(0)) - t * z + std::log1p(std::exp(-std::abs(z))));
      grad[b] = (sigmoid(z) - t) / static_cast<T>(n);
    }
    return static_cast<T>(total / static_cast<double>(n));
  }

  NetConfig config_;
  std::uint64_t seed_;
  Normalization norm_;
  std::vector<std::unique_ptr<Layer<T>>> layers_;
  std::vector<Shape> out_shapes_;
  std::vector<bool> probe_;
  std::vector<Tensor<T>> acts_;
  std::vector<Tensor<T>> grads_;
};

template <class T>
Network<T> build_network(const NetConfig& config, std::uint64_t seed) {
  return Network<T>(config, seed);
}

/// Functional form of Network::backward returning copies of the gradients.
template <class T>
BackwardResult<T> backward(Network<T>& net, const Tensor<T>& batch, const Tensor<T>& targets,
                           LossKind loss) {
  BackwardResult<T> r;
  r.loss = net.backward(batch, targets, loss);
  for (auto& p : net.params()) r.gradients.push_back(*p.grad);
  return r;
}

}  // namespace gcl::nn

#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "gcl/core/error.hpp"
#include "gcl/core/tensor.hpp"
#include "gcl/nn/config.hpp"
#include "gcl/nn/layers.hpp"

namespace gcl::nn {

struct RmsPropConfig {
  double lr = 1e-3;
  double rho = 0.9;
  double eps = 1e-8;
};

/// 0.001 for ConvNets, 0.0001 for FCNets.
inline double default_learning_rate(NetKind k) { return k == NetKind::Conv ? 1e-3 : 1e-4; }

/// RMSProp: a <- rho a + (1 - rho) g^2;  p <- p - lr g / (sqrt(a) + eps).
template <class T>
class RmsProp {
 public:
  RmsProp() = default;
  explicit RmsProp(RmsPropConfig cfg) : cfg_(cfg) {}

  const RmsPropConfig& config() const { return cfg_; }
  void set_lr(double lr) { cfg_.lr = lr; }
  std::uint64_t steps() const { return steps_; }
  const std::vector<Tensor<T>>& accumulators() const { return acc_; }

  void restore(std::vector<Tensor<T>> acc, std::uint64_t steps) {
    acc_ = std::move(acc);
    steps_ = steps;
  }

  void step(const std::vector<ParamRef<T>>& params) {
    if (acc_.empty())
      for (const auto& p : params) acc_.emplace_back(p.value->shape());
    if (acc_.size() != params.size()) throw Error("rmsprop: parameter list changed");
    for (const auto& p : params)
      if (!p.grad->all_finite()) throw NumericError("rmsprop: non-finite gradient in " + p.name);
    const T rho = static_cast<T>(cfg_.rho), lr = static_cast<T>(cfg_.lr),
            eps = static_cast<T>(cfg_.eps);
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto& a = acc_[i];
      auto& v = *params[i].value;
      const auto& g = *params[i].grad;
      if (a.shape() != v.shape()) throw Error("rmsprop: shape changed for " + params[i].name);
      for (std::size_t j = 0; j < v.size(); ++j) {
        a[j] = rho * a[j] + (T(1) - rho) * g[j] * g[j];
        v[j] -= lr * g[j] / (std::sqrt(a[j]) + eps);
      }
    }
    ++steps_;
  }

 private:
  RmsPropConfig cfg_;
  std::vector<Tensor<T>> acc_;
  std::uint64_t steps_ = 0;
};

}  // namespace gcl::nn

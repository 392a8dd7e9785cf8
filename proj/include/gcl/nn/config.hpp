#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "gcl/core/error.hpp"

namespace gcl::nn {

enum class NetKind { Conv, FullyConnected };
enum class HeadKind { Softmax, Sigmoid };

inline std::string_view to_string(NetKind k) { return k == NetKind::Conv ? "conv" : "fc"; }
inline std::string_view to_string(HeadKind h) { return h == HeadKind::Softmax ? "softmax" : "sigmoid"; }

inline NetKind parse_net_kind(std::string_view s) {
  if (s == "conv") return NetKind::Conv;
  if (s == "fc" || s == "fully_connected") return NetKind::FullyConnected;
  throw Error("unknown net kind '" + std::string(s) + "' (expected conv or fc)");
}
inline HeadKind parse_head(std::string_view s) {
  if (s == "softmax") return HeadKind::Softmax;
  if (s == "sigmoid") return HeadKind::Sigmoid;
  throw Error("unknown head '" + std::string(s) + "' (expected softmax or sigmoid)");
}

struct NetConfig {
  NetKind kind = NetKind::Conv;
  int n_layers = 3;
  int n_classes = 3;
  int base_width = 16;
  int width_step = 16;
  int penultimate_width = 512;
  HeadKind head = HeadKind::Softmax;
  int input_height = 150;
  int input_width = 150;
  int input_channels = 3;
  /// Lifts the restriction to the published n_l / n_c levels (tiny nets for
  /// gradient checks and tests).
  bool custom = false;

  /// Filters (conv) or units (fc) of hidden block i, 0-based.
  int width(int i) const { return base_width + width_step * i; }

  /// Number of outputs of the head layer.
  int head_units() const { return head == HeadKind::Sigmoid ? 1 : n_classes; }

  friend bool operator==(const NetConfig&, const NetConfig&) = default;
};

/// The sanity-check architecture: three conv blocks, single sigmoid unit.
inline NetConfig binary_conv_config() {
  NetConfig c;
  c.n_classes = 2;
  c.head = HeadKind::Sigmoid;
  return c;
}

inline void validate(const NetConfig& c) {
  auto in = [](int v, std::initializer_list<int> ok) {
    for (int o : ok)
      if (o == v) return true;
    return false;
  };
  if (!c.custom) {
    if (!in(c.n_layers, {3, 5, 7}))
      throw Error("n_layers: " + std::to_string(c.n_layers) + " not in {3,5,7}");
    if (!in(c.n_classes, {2, 3, 6, 9}))
      throw Error("n_classes: " + std::to_string(c.n_classes) + " not in {2,3,6,9}");
    if (c.penultimate_width != 512) throw Error("penultimate_width: must be 512");
  }
  if (c.n_layers < 1) throw Error("n_layers: must be positive");
  if (c.n_classes < 2) throw Error("n_classes: must be at least 2");
  if (c.head == HeadKind::Sigmoid && c.n_classes != 2)
    throw Error("head: sigmoid requires n_classes = 2, got " + std::to_string(c.n_classes));
  if (c.base_width < 1 || c.width_step < 0 || c.penultimate_width < 1)
    throw Error("base_width: layer widths must be positive");
  if (c.input_height < 1 || c.input_width < 1 || c.input_channels < 1)
    throw Error("input_height: input shape must be positive");
  if (c.kind == NetKind::Conv) {
    int h = c.input_height, w = c.input_width;
    for (int i = 0; i < c.n_layers; ++i) {
      h /= 2;
      w /= 2;
    }
    if (h < 1 || w < 1)
      throw Error("input_height: " + std::to_string(c.input_height) + "x" + std::to_string(c.input_width) +
                  " too small for " + std::to_string(c.n_layers) + " pooling stages");
  }
}

}  // namespace gcl::nn

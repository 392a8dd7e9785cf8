#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "gcl/core/error.hpp"
#include "gcl/core/image.hpp"
#include "gcl/core/rng.hpp"
#include "gcl/nn/network.hpp"
#include "gcl/training/dataset.hpp"

namespace gcl::training {

struct AugmentationConfig {
  bool horizontal_flip = true;
  /// Maximum shift as a fraction of the image side.
  double translation_range = 0.02;
  bool featurewise_normalization = true;
};

inline void validate(const AugmentationConfig& a) {
  if (!(a.translation_range >= 0.0 && a.translation_range < 0.5))
    throw Error("translation_range must be in [0, 0.5)");
}

/// Stimulus-trained sanity nets run without augmentation or normalisation.
inline AugmentationConfig no_augmentation() { return {false, 0.0, false}; }

/// Largest integer shift in pixels for a given side length.
inline int max_shift(const AugmentationConfig& a, std::size_t side) {
  return static_cast<int>(std::lround(a.translation_range * static_cast<double>(side)));
}

/// Shifts by (dx, dy) pixels with edge replication, optionally mirroring
/// left-right first.
inline Image flip_translate(const Image& src, bool flip, int dx, int dy) {
  Image out(src.height, src.width, src.channels);
  const long h = static_cast<long>(src.height), w = static_cast<long>(src.width);
  for (long y = 0; y < h; ++y) {
    const long sy = std::clamp(y - dy, 0L, h - 1);
    for (long x = 0; x < w; ++x) {
      long sx = std::clamp(x - dx, 0L, w - 1);
      if (flip) sx = w - 1 - sx;
      for (std::size_t c = 0; c < src.channels; ++c)
        out.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x), c) =
            src.at(static_cast<std::size_t>(sy), static_cast<std::size_t>(sx), c);
    }
  }
  return out;
}

/// Random flip (p = 0.5) and integer translation, both drawn from eng.
inline Image augment(const Image& src, const AugmentationConfig& a, Engine& eng) {
  const bool flip = a.horizontal_flip && bernoulli(eng, 0.5);
  const int r = max_shift(a, std::min(src.height, src.width));
  const int dx = r > 0 ? static_cast<int>(uniform_int(eng, -r, r)) : 0;
  const int dy = r > 0 ? static_cast<int>(uniform_int(eng, -r, r)) : 0;
  if (!flip && dx == 0 && dy == 0) return src;
  return flip_translate(src, flip, dx, dy);
}

/// Per-channel mean and standard deviation over every pixel of the listed
/// examples (the training split).
inline nn::Normalization featurewise_stats(const Dataset& ds) {
  if (ds.items.empty()) throw Error("featurewise_stats: empty dataset");
  const std::size_t ch = ds.image(0).channels;
  std::vector<double> sum(ch, 0.0), sq(ch, 0.0);
  std::size_t count = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto& img = ds.image(i);
    for (std::size_t p = 0; p < img.pixel_count(); ++p)
      for (std::size_t c = 0; c < ch; ++c) {
        const double v = img.values[p * ch + c];
        sum[c] += v;
        sq[c] += v * v;
      }
    count += img.pixel_count();
  }
  nn::Normalization n;
  for (std::size_t c = 0; c < ch; ++c) {
    const double m = sum[c] / static_cast<double>(count);
    const double var = std::max(0.0, sq[c] / static_cast<double>(count) - m * m);
    n.mean.push_back(m);
    n.stddev.push_back(var > 0.0 ? std::sqrt(var) : 1.0);
  }
  return n;
}

/// Applies standardisation to an image (outside a network).
inline Image normalize(const Image& img, const nn::Normalization& n) {
  if (n.identity()) return img;
  Image out = img;
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    const std::size_t c = i % img.channels;
    out.values[i] = static_cast<float>((img.values[i] - n.mean[c]) / n.stddev[c]);
  }
  return out;
}

}  // namespace gcl::training

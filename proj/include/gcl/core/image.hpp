#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <vector>

#include "gcl/core/error.hpp"

namespace gcl {

/// H x W x C image, row-major with interleaved channels. Network inputs live
/// in [-1, +1].
struct Image {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;
  std::vector<float> values;

  Image() = default;
  Image(std::size_t h, std::size_t w, std::size_t c, float fill = 0.0f)
      : height(h), width(w), channels(c), values(h * w * c, fill) {}

  std::size_t index(std::size_t y, std::size_t x, std::size_t ch) const {
    return (y * width + x) * channels + ch;
  }
  float& at(std::size_t y, std::size_t x, std::size_t ch) { return values[index(y, x, ch)]; }
  float at(std::size_t y, std::size_t x, std::size_t ch) const { return values[index(y, x, ch)]; }

  std::size_t pixel_count() const { return height * width; }
  bool same_shape(const Image& o) const {
    return height == o.height && width == o.width && channels == o.channels;
  }

  friend bool operator==(const Image& a, const Image& b) {
    return a.same_shape(b) && a.values == b.values;
  }
};

inline bool in_unit_range(const Image& img) {
  return std::all_of(img.values.begin(), img.values.end(),
                     [](float v) { return v >= -1.0f && v <= 1.0f; });
}

}  // namespace gcl

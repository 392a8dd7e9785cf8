#pragma once

// Image codecs (OpenCV) and the bit-exact raw-f32 dump format.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "gcl/core/error.hpp"
#include "gcl/core/image.hpp"

namespace gcl {

static_assert(std::endian::native == std::endian::little, "raw-f32 dumps assume little-endian hosts");

/// [-1, +1] -> 0..255 (rounded, clamped).
inline std::uint8_t to_byte(float v) {
  const float s = std::round((std::clamp(v, -1.0f, 1.0f) + 1.0f) * 127.5f);
  return static_cast<std::uint8_t>(s);
}

inline float from_byte(std::uint8_t b) { return static_cast<float>(b) / 127.5f - 1.0f; }

inline void write_png(const std::filesystem::path& path, const Image& img) {
  if (img.channels != 1 && img.channels != 3) throw IoError(path.string(), "png needs 1 or 3 channels");
  cv::Mat mat(static_cast<int>(img.height), static_cast<int>(img.width),
              img.channels == 3 ? CV_8UC3 : CV_8UC1);
  for (std::size_t y = 0; y < img.height; ++y) {
    auto* row = mat.ptr<std::uint8_t>(static_cast<int>(y));
    for (std::size_t x = 0; x < img.width; ++x)
      for (std::size_t c = 0; c < img.channels; ++c)
        // OpenCV stores BGR.
        row[x * img.channels + (img.channels == 3 ? 2 - c : c)] = to_byte(img.at(y, x, c));
  }
  if (!cv::imwrite(path.string(), mat)) throw IoError(path.string(), "png encode/write failed");
}

/// Decodes PNG/JPEG to RGB, resizes to size x size (area interpolation when
/// shrinking, linear otherwise) and maps each channel to [-1, +1].
inline Image read_image(const std::filesystem::path& path, std::size_t size) {
  cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (bgr.empty()) throw IoError(path.string(), "cannot decode image");
  if (bgr.depth() != CV_8U) bgr.convertTo(bgr, CV_8U);
  const int s = static_cast<int>(size);
  if (bgr.rows != s || bgr.cols != s) {
    const bool shrink = bgr.rows > s || bgr.cols > s;
    cv::resize(bgr, bgr, cv::Size(s, s), 0, 0, shrink ? cv::INTER_AREA : cv::INTER_LINEAR);
  }
  Image img(size, size, 3);
  for (std::size_t y = 0; y < size; ++y) {
    const auto* row = bgr.ptr<std::uint8_t>(static_cast<int>(y));
    for (std::size_t x = 0; x < size; ++x)
      for (std::size_t c = 0; c < 3; ++c) img.at(y, x, c) = from_byte(row[x * 3 + (2 - c)]);
  }
  return img;
}

inline void write_raw_f32(const std::filesystem::path& path, const Image& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(path.string(), "cannot open for writing");
  out.write(reinterpret_cast<const char*>(img.values.data()),
            static_cast<std::streamsize>(img.values.size() * sizeof(float)));
  if (!out) throw IoError(path.string(), "write failed");
}

inline Image read_raw_f32(const std::filesystem::path& path, std::size_t h, std::size_t w,
                          std::size_t c) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw IoError(path.string(), "cannot open for reading");
  const auto bytes = static_cast<std::size_t>(in.tellg());
  if (bytes != h * w * c * sizeof(float))
    throw IoError(path.string(), "size " + std::to_string(bytes) + " does not match " +
                                     std::to_string(h) + "x" + std::to_string(w) + "x" +
                                     std::to_string(c) + " f32");
  in.seekg(0);
  Image img(h, w, c);
  in.read(reinterpret_cast<char*>(img.values.data()), static_cast<std::streamsize>(bytes));
  if (!in) throw IoError(path.string(), "read failed");
  return img;
}

}  // namespace gcl

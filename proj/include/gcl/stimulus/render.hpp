#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "gcl/core/image.hpp"
#include "gcl/stimulus/spec.hpp"

namespace gcl::stimulus {

struct RenderOptions {
  double stroke_width = 4.0;
  /// Sub-samples per axis for pixels that straddle a stroke boundary.
  int supersample = 8;
  std::size_t image_size = kImageSize;
  std::size_t channels = 3;
  double vertex_distance = kVertexDistance;
};

struct Point {
  double x = 0.0;
  double y = 0.0;
};

struct Segment {
  Point a;
  Point b;
};

inline double deg2rad(double deg) { return deg * std::numbers::pi / 180.0; }

/// Counter-clockwise (as seen on screen, y pointing down) rotation of p about c.
inline Point rotate_about(Point p, Point c, double degrees) {
  const double r = deg2rad(degrees);
  const double dx = p.x - c.x, dy = p.y - c.y;
  const double cs = std::cos(r), sn = std::sin(r);
  return {c.x + cs * dx + sn * dy, c.y - sn * dx + cs * dy};
}

inline Point centroid(const StimulusSpec& s, const RenderOptions& opt = {}) {
  const double mid = static_cast<double>(opt.image_size) / 2.0;
  const double off = s.position == Position::Offset ? kOffsetPixels : 0.0;
  return {mid + off, mid + off};
}

/// Triangle vertices. At theta_global = 0 the first vertex points straight up;
/// theta_global rotates the shape counter-clockwise about its centroid.
inline std::array<Point, 3> vertices(const StimulusSpec& s, const RenderOptions& opt = {}) {
  const Point c = centroid(s, opt);
  const double radius = opt.vertex_distance / std::sqrt(3.0);
  std::array<Point, 3> v;
  for (int k = 0; k < 3; ++k) {
    const double phi = deg2rad(s.theta_global + 90.0 + 120.0 * k);
    v[k] = {c.x + radius * std::cos(phi), c.y - radius * std::sin(phi)};
  }
  return v;
}

/// Stroke centre-lines making up the stimulus: the three sides for a complete
/// triangle, or per vertex two stubs of edge_length along the adjacent sides,
/// rotated by theta_local about the vertex for disordered fragments.
inline std::vector<Segment> stroke_segments(const StimulusSpec& s, const RenderOptions& opt = {}) {
  validate(s);
  const auto v = vertices(s, opt);
  std::vector<Segment> segs;
  if (s.condition == Condition::Complete) {
    for (int k = 0; k < 3; ++k) segs.push_back({v[k], v[(k + 1) % 3]});
    return segs;
  }
  const double len = *s.edge_length;
  const double local = s.theta_local.value_or(0);
  for (int k = 0; k < 3; ++k) {
    for (int nb : {(k + 1) % 3, (k + 2) % 3}) {
      const double dx = v[nb].x - v[k].x, dy = v[nb].y - v[k].y;
      const double n = std::hypot(dx, dy);
      Point tip{v[k].x + len * dx / n, v[k].y + len * dy / n};
      if (local != 0.0) tip = rotate_about(tip, v[k], local);
      segs.push_back({v[k], tip});
    }
  }
  return segs;
}

inline double distance_to_segment(Point p, const Segment& s) {
  const double vx = s.b.x - s.a.x, vy = s.b.y - s.a.y;
  const double wx = p.x - s.a.x, wy = p.y - s.a.y;
  const double len2 = vx * vx + vy * vy;
  double t = len2 > 0.0 ? (wx * vx + wy * vy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return std::hypot(wx - t * vx, wy - t * vy);
}

/// Fraction of each pixel's area covered by round-capped strokes of the given
/// width around the segments. Row-major, image_size^2 entries.
inline std::vector<double> coverage_map(const std::vector<Segment>& segs, const RenderOptions& opt) {
  const std::size_t n = opt.image_size;
  const double half = opt.stroke_width / 2.0;
  const double reach = std::sqrt(0.5);  // pixel centre to corner
  const int ss = std::max(1, opt.supersample);
  std::vector<double> cov(n * n, 0.0);

  auto min_dist = [&](Point p) {
    double d = std::numeric_limits<double>::infinity();
    for (const auto& sg : segs) d = std::min(d, distance_to_segment(p, sg));
    return d;
  };

  for (std::size_t y = 0; y < n; ++y) {
    for (std::size_t x = 0; x < n; ++x) {
      const Point centre{x + 0.5, y + 0.5};
      const double d = min_dist(centre);
      if (d > half + reach) continue;
      if (d < half - reach) {
        cov[y * n + x] = 1.0;
        continue;
      }
      int hits = 0;
      for (int sy = 0; sy < ss; ++sy)
        for (int sx = 0; sx < ss; ++sx) {
          const Point p{x + (sx + 0.5) / ss, y + (sy + 0.5) / ss};
          if (min_dist(p) <= half) ++hits;
        }
      cov[y * n + x] = static_cast<double>(hits) / (ss * ss);
    }
  }
  return cov;
}

inline float background_value(Background b) { return b == Background::Black ? -1.0f : 1.0f; }

/// Renders the stimulus. Background pixels are -1 (black) or +1 (white), the
/// strokes take the opposite value, and partially covered pixels blend
/// linearly by coverage. All channels are identical.
inline Image render(const StimulusSpec& s, const RenderOptions& opt = {}) {
  const auto cov = coverage_map(stroke_segments(s, opt), opt);
  const float bg = background_value(s.background);
  const float fg = -bg;
  Image img(opt.image_size, opt.image_size, opt.channels, bg);
  for (std::size_t p = 0; p < cov.size(); ++p) {
    if (cov[p] == 0.0) continue;
    const float v = static_cast<float>(bg + cov[p] * (fg - bg));
    for (std::size_t c = 0; c < opt.channels; ++c) img.values[p * opt.channels + c] = v;
  }
  return img;
}

/// Number of pixels whose value differs from the background.
inline std::size_t foreground_pixel_count(const Image& img, Background b) {
  const float bg = background_value(b);
  std::size_t count = 0;
  for (std::size_t p = 0; p < img.pixel_count(); ++p)
    if (img.values[p * img.channels] != bg) ++count;
  return count;
}

}  // namespace gcl::stimulus

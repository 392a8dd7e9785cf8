#pragma once

// Edge-length vs mean-closure line charts with shaded confidence bands.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "gcl/closure/curve.hpp"
#include "gcl/core/error.hpp"
#include "gcl/stimulus/spec.hpp"

namespace gcl::report {

struct PlotTheme {
  int width = 640;
  int height = 400;
  int margin_left = 64;
  int margin_right = 170;
  int margin_top = 40;
  int margin_bottom = 52;
  double band_opacity = 0.2;
  double line_width = 2.0;
  std::string font = "sans-serif";
  std::vector<std::string> palette{"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                   "#9467bd", "#8c564b", "#e377c2", "#17becf"};
};

struct Series {
  std::string label;
  closure::ClosureCurve curve;
};

struct Plot {
  std::string title;
  std::string x_label = "edge length (px)";
  std::string y_label = "mean closure";
  std::vector<Series> series;  ///< legend order, top to bottom
};

namespace detail {

inline std::string fmt(double v, int decimals = 2) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  std::string s = buf;
  if (s[0] == '-' && s.find_first_not_of("-0.") == std::string::npos) s.erase(0, 1);
  return s;
}

inline std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

/// Tick step of 1, 2 or 5 times a power of ten giving about `target` ticks.
inline double nice_step(double span, int target = 5) {
  const double raw = span / target;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  for (double m : {1.0, 2.0, 5.0, 10.0})
    if (raw <= m * mag) return m * mag;
  return 10.0 * mag;
}

}  // namespace detail

/// Renders the plot as a standalone SVG document. Output depends only on
/// the plot contents.
inline std::string render_svg(const Plot& plot, const PlotTheme& theme = {}) {
  if (plot.series.empty()) throw Error("plot has no series (empty input)");
  for (const auto& s : plot.series)
    if (s.curve.points.empty()) throw Error("series '" + s.label + "' has no points");

  double y_min = 0.0, y_max = 0.0;
  double x_min = stimulus::kEdgeLengths.front(), x_max = stimulus::kEdgeLengths.back();
  for (const auto& s : plot.series)
    for (const auto& p : s.curve.points) {
      y_min = std::min({y_min, p.mean, p.ci_lo});
      y_max = std::max({y_max, p.mean, p.ci_hi});
      x_min = std::min(x_min, static_cast<double>(p.edge_length));
      x_max = std::max(x_max, static_cast<double>(p.edge_length));
    }
  if (y_max - y_min < 1e-9) {
    y_min -= 0.05;
    y_max += 0.05;
  }
  const double step = detail::nice_step(y_max - y_min);
  y_min = std::floor(y_min / step) * step;
  y_max = std::ceil(y_max / step) * step;

  const double pw = theme.width - theme.margin_left - theme.margin_right;
  const double ph = theme.height - theme.margin_top - theme.margin_bottom;
  auto px = [&](double x) { return theme.margin_left + (x - x_min) / (x_max - x_min) * pw; };
  auto py = [&](double y) { return theme.margin_top + (y_max - y) / (y_max - y_min) * ph; };

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << theme.width << "\" height=\""
    << theme.height << "\" viewBox=\"0 0 " << theme.width << ' ' << theme.height << "\" font-family=\""
    << theme.font << "\" font-size=\"12\">\n";
  o << "<rect x=\"0\" y=\"0\" width=\"" << theme.width << "\" height=\"" << theme.height
    << "\" fill=\"white\"/>\n";
  if (!plot.title.empty())
    o << "<text x=\"" << detail::fmt(theme.margin_left + pw / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">"
      << detail::escape(plot.title) << "</text>\n";

  // Grid and y ticks.
  o << "<g class=\"y-axis\" stroke=\"#dddddd\">\n";
  const int n_y = static_cast<int>(std::llround((y_max - y_min) / step));
  for (int i = 0; i <= n_y; ++i) {
    const double y = y_min + i * step;
    o << "<line x1=\"" << detail::fmt(px(x_min)) << "\" y1=\"" << detail::fmt(py(y)) << "\" x2=\""
      << detail::fmt(px(x_max)) << "\" y2=\"" << detail::fmt(py(y)) << "\"/>\n";
    o << "<text x=\"" << detail::fmt(px(x_min) - 6) << "\" y=\"" << detail::fmt(py(y) + 4)
      << "\" text-anchor=\"end\" stroke=\"none\" fill=\"black\">" << detail::fmt(y, step < 0.1 ? 2 : 1)
      << "</text>\n";
  }
  o << "</g>\n";
  o << "<line class=\"zero\" x1=\"" << detail::fmt(px(x_min)) << "\" y1=\"" << detail::fmt(py(0.0))
    << "\" x2=\"" << detail::fmt(px(x_max)) << "\" y2=\"" << detail::fmt(py(0.0))
    << "\" stroke=\"#888888\" stroke-dasharray=\"4 3\"/>\n";

  // X ticks at the edge-length levels.
  o << "<g class=\"x-axis\">\n";
  for (int e : stimulus::kEdgeLengths) {
    o << "<line class=\"x-tick\" x1=\"" << detail::fmt(px(e)) << "\" y1=\"" << detail::fmt(py(y_min))
      << "\" x2=\"" << detail::fmt(px(e)) << "\" y2=\"" << detail::fmt(py(y_min) + 5) << "\" stroke=\"black\"/>\n";
    o << "<text x=\"" << detail::fmt(px(e)) << "\" y=\"" << detail::fmt(py(y_min) + 18)
      << "\" text-anchor=\"middle\">" << e << "</text>\n";
  }
  o << "</g>\n";
  o << "<rect x=\"" << detail::fmt(px(x_min)) << "\" y=\"" << detail::fmt(py(y_max)) << "\" width=\""
    << detail::fmt(pw) << "\" height=\"" << detail::fmt(ph) << "\" fill=\"none\" stroke=\"black\"/>\n";
  o << "<text x=\"" << detail::fmt(theme.margin_left + pw / 2) << "\" y=\"" << theme.height - 12
    << "\" text-anchor=\"middle\">" << detail::escape(plot.x_label) << "</text>\n";
  o << "<text transform=\"translate(16 " << detail::fmt(theme.margin_top + ph / 2)
    << ") rotate(-90)\" text-anchor=\"middle\">" << detail::escape(plot.y_label) << "</text>\n";

  for (std::size_t k = 0; k < plot.series.size(); ++k) {
    const auto& s = plot.series[k];
    const auto& color = theme.palette[k % theme.palette.size()];
    auto pts = s.curve.points;
    std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) { return a.edge_length < b.edge_length; });
    o << "<g class=\"series\" data-label=\"" << detail::escape(s.label) << "\">\n";
    o << "<polygon class=\"band\" fill=\"" << color << "\" fill-opacity=\"" << detail::fmt(theme.band_opacity)
      << "\" stroke=\"none\" points=\"";
    for (const auto& p : pts) o << detail::fmt(px(p.edge_length)) << ',' << detail::fmt(py(p.ci_hi)) << ' ';
    for (auto it = pts.rbegin(); it != pts.rend(); ++it)
      o << detail::fmt(px(it->edge_length)) << ',' << detail::fmt(py(it->ci_lo)) << ' ';
    o << "\"/>\n";
    o << "<polyline class=\"line\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\""
      << detail::fmt(theme.line_width, 1) << "\" points=\"";
    for (std::size_t i = 0; i < pts.size(); ++i)
      o << (i ? " " : "") << detail::fmt(px(pts[i].edge_length)) << ',' << detail::fmt(py(pts[i].mean));
    o << "\"/>\n";
    for (const auto& p : pts)
      o << "<circle cx=\"" << detail::fmt(px(p.edge_length)) << "\" cy=\"" << detail::fmt(py(p.mean))
        << "\" r=\"3\" fill=\"" << color << "\"/>\n";
    o << "</g>\n";
  }

  // Legend, in series order.
  const double lx = theme.width - theme.margin_right + 16;
  o << "<g class=\"legend\">\n";
  for (std::size_t k = 0; k < plot.series.size(); ++k) {
    const double ly = theme.margin_top + 10 + 20.0 * static_cast<double>(k);
    const auto& color = theme.palette[k % theme.palette.size()];
    o << "<line x1=\"" << detail::fmt(lx) << "\" y1=\"" << detail::fmt(ly) << "\" x2=\"" << detail::fmt(lx + 20)
      << "\" y2=\"" << detail::fmt(ly) << "\" stroke=\"" << color << "\" stroke-width=\"3\"/>\n";
    o << "<text class=\"legend-label\" x=\"" << detail::fmt(lx + 26) << "\" y=\"" << detail::fmt(ly + 4) << "\">"
      << detail::escape(plot.series[k].label) << "</text>\n";
  }
  o << "</g>\n</svg>\n";
  return o.str();
}

/// Labels each curve by whatever distinguishes it: the layer when all
/// curves share a model, the model when all share a layer, else both.
inline Plot plot_from_curves(const std::vector<closure::ClosureCurve>& curves, const std::string& title = "") {
  if (curves.empty()) throw Error("no curves to plot (empty input)");
  std::set<std::string> models, layers;
  for (const auto& c : curves) {
    models.insert(c.model_id);
    layers.insert(c.layer);
  }
  Plot p;
  p.title = title;
  for (const auto& c : curves) {
    std::string label = models.size() == 1 ? c.layer : layers.size() == 1 ? c.model_id : c.model_id + " / " + c.layer;
    p.series.push_back({label, c});
  }
  return p;
}

inline void write_svg(const std::filesystem::path& path, const Plot& plot, const PlotTheme& theme = {}) {
  const auto text = render_svg(plot, theme);
  std::ofstream out(path);
  if (!out) throw IoError(path.string(), "cannot open for writing");
  out << text;
  if (!out) throw IoError(path.string(), "write failed");
}

}  // namespace gcl::report

#pragma once

#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "gcl/core/error.hpp"
#include "gcl/core/image_io.hpp"
#include "gcl/stimulus/render.hpp"
#include "gcl/stimulus/triples.hpp"

namespace gcl::stimulus {

enum class ExportFormat { Png, RawF32 };

inline ExportFormat parse_export_format(std::string_view s) {
  if (s == "png") return ExportFormat::Png;
  if (s == "raw" || s == "raw-f32") return ExportFormat::RawF32;
  throw Error("unknown export format '" + std::string(s) + "' (expected png or raw)");
}

inline constexpr const char* kStimuliHeader =
    "index,condition,background,position,theta_global,edge_length,theta_local,filename";
inline constexpr const char* kTriplesHeader =
    "triple_index,edge_length,complete_index,aligned_index,disordered_index";

inline std::string stimulus_filename(std::size_t index, ExportFormat fmt) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "stim_%04zu.%s", index, fmt == ExportFormat::Png ? "png" : "f32");
  return buf;
}

/// Renders every spec into dir and writes the listing dir/stimuli.csv.
/// Returns the listing's path.
inline std::filesystem::path export_stimuli(const std::filesystem::path& dir, ExportFormat fmt,
                                            const RenderOptions& opt = {}) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError(dir.string(), ec.message());
  const auto specs = enumerate_specs();
  const auto manifest = dir / "stimuli.csv";
  std::ofstream out(manifest);
  if (!out) throw IoError(manifest.string(), "cannot open for writing");
  out << kStimuliHeader << '\n';
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const auto& s = specs[i];
    const auto name = stimulus_filename(i, fmt);
    const auto img = render(s, opt);
    if (fmt == ExportFormat::Png)
      write_png(dir / name, img);
    else
      write_raw_f32(dir / name, img);
    out << i << ',' << to_string(s.condition) << ',' << to_string(s.background) << ','
        << to_string(s.position) << ',' << s.theta_global << ','
        << (s.edge_length ? std::to_string(*s.edge_length) : "") << ','
        << (s.theta_local ? std::to_string(*s.theta_local) : "") << ',' << name << '\n';
  }
  if (!out) throw IoError(manifest.string(), "write failed");
  return manifest;
}

inline void write_triples_csv(const std::filesystem::path& path, const std::vector<Triple>& triples) {
  std::ofstream out(path);
  if (!out) throw IoError(path.string(), "cannot open for writing");
  out << kTriplesHeader << '\n';
  for (const auto& t : triples)
    out << t.index << ',' << t.edge_length << ',' << t.complete_index << ',' << t.aligned_index
        << ',' << t.disordered_index << '\n';
  if (!out) throw IoError(path.string(), "write failed");
}

/// Reads a triples CSV back and re-validates every row against the pairing
/// constraints.
inline std::vector<Triple> read_triples_csv(const std::filesystem::path& path,
                                            const TripleOptions& opt = {}) {
  std::ifstream in(path);
  if (!in) throw IoError(path.string(), "cannot open for reading");
  std::string line;
  std::getline(in, line);
  if (line != kTriplesHeader) throw IoError(path.string(), "unexpected header '" + line + "'");
  const auto specs = enumerate_specs();
  std::vector<Triple> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string f;
    std::vector<long> v;
    while (std::getline(row, f, ',')) {
      long x = 0;
      const auto [end, ec] = std::from_chars(f.data(), f.data() + f.size(), x);
      if (ec != std::errc() || end != f.data() + f.size())
        throw IoError(path.string(), "line " + std::to_string(lineno) + ": bad integer '" + f + "'");
      v.push_back(x);
    }
    if (v.size() != 5) throw IoError(path.string(), "line " + std::to_string(lineno) + ": 5 fields expected");
    for (int k = 2; k < 5; ++k)
      if (v[k] < 0 || static_cast<std::size_t>(v[k]) >= specs.size())
        throw IoError(path.string(), "line " + std::to_string(lineno) + ": spec index out of range");
    Triple t;
    t.index = static_cast<std::size_t>(v[0]);
    t.edge_length = static_cast<int>(v[1]);
    t.complete_index = static_cast<std::size_t>(v[2]);
    t.aligned_index = static_cast<std::size_t>(v[3]);
    t.disordered_index = static_cast<std::size_t>(v[4]);
    t.complete = specs[t.complete_index];
    t.aligned = specs[t.aligned_index];
    t.disordered = specs[t.disordered_index];
    if (auto why = triple_violation(t, opt); !why.empty())
      throw IoError(path.string(), "line " + std::to_string(lineno) + ": invalid triple (" + why + ")");
    out.push_back(t);
  }
  return out;
}

}  // namespace gcl::stimulus

#pragma once

// Minimal CSV helpers for the numeric tables this library writes: no quoting,
// fields never contain commas.

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "gcl/core/error.hpp"

namespace gcl::csv {

/// Shortest text that reads back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw Error("format_double failed");
  return std::string(buf, ptr);
}

inline std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::filesystem::path source;

  std::size_t column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw IoError(source.string(), "missing column '" + name + "'");
  }
};

inline Table read(const std::filesystem::path& path, const std::string& expected_header = "") {
  std::ifstream in(path);
  if (!in) throw IoError(path.string(), "cannot open for reading");
  Table t;
  t.source = path;
  std::string line;
  if (!std::getline(in, line)) throw IoError(path.string(), "empty file");
  if (!expected_header.empty() && line != expected_header)
    throw IoError(path.string(), "unexpected header '" + line + "' (expected '" + expected_header + "')");
  t.header = split(line);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto row = split(line);
    if (row.size() != t.header.size())
      throw IoError(path.string(), "line " + std::to_string(lineno) + ": expected " +
                                       std::to_string(t.header.size()) + " fields, got " +
                                       std::to_string(row.size()));
    t.rows.push_back(std::move(row));
  }
  return t;
}

inline double to_double(const std::string& s, const Table& t) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw IoError(t.source.string(), "not a number: '" + s + "'");
  return v;
}

inline long to_long(const std::string& s, const Table& t) {
  long v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw IoError(t.source.string(), "not an integer: '" + s + "'");
  return v;
}

class Writer {
 public:
  Writer(const std::filesystem::path& path, const std::string& header) : path_(path), out_(path) {
    if (!out_) throw IoError(path.string(), "cannot open for writing");
    out_ << header << '\n';
  }
  template <class... Fields>
  void row(const Fields&... fields) {
    std::size_t i = 0;
    ((out_ << (i++ ? "," : "") << cell(fields)), ...);
    out_ << '\n';
  }
  void close() {
    out_.close();
    if (!out_) throw IoError(path_.string(), "write failed");
  }
  ~Writer() = default;

 private:
  static std::string cell(double v) { return format_double(v); }
  static std::string cell(const std::string& s) { return s; }
  static std::string cell(const char* s) { return s; }
  template <class I>
    requires std::is_integral_v<I>
  static std::string cell(I v) { return std::to_string(v); }

  std::filesystem::path path_;
  std::ofstream out_;
};

}  // namespace gcl::csv

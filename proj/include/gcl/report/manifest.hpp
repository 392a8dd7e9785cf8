#pragma once

#include <algorithm>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gcl/core/error.hpp"
#include "gcl/core/hash.hpp"
#include "gcl/version.hpp"

namespace gcl::report {

inline constexpr const char* kManifestName = "manifest.json";

/// Record of one CLI run: what was asked for, what it read and what it wrote.
struct RunManifest {
  std::string tool_version = kVersion;
  std::string command;
  nlohmann::json config;  ///< fully resolved configuration
  std::map<std::string, std::uint64_t> seeds;
  std::map<std::string, std::string> inputs;   ///< name -> content hash
  std::map<std::string, std::string> outputs;  ///< relative path -> content hash
  std::string started_at;
  std::string finished_at;
};

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline nlohmann::json to_json(const RunManifest& m) {
  return {{"manifest_version", 1},   {"tool_version", m.tool_version}, {"command", m.command},
          {"config", m.config},      {"seeds", m.seeds},               {"inputs", m.inputs},
          {"outputs", m.outputs},    {"started_at", m.started_at},     {"finished_at", m.finished_at}};
}

inline RunManifest manifest_from_json(const nlohmann::json& j) {
  RunManifest m;
  m.tool_version = j.at("tool_version").get<std::string>();
  m.command = j.at("command").get<std::string>();
  m.config = j.at("config");
  m.seeds = j.at("seeds").get<std::map<std::string, std::uint64_t>>();
  m.inputs = j.at("inputs").get<std::map<std::string, std::string>>();
  m.outputs = j.at("outputs").get<std::map<std::string, std::string>>();
  m.started_at = j.value("started_at", "");
  m.finished_at = j.value("finished_at", "");
  return m;
}

inline RunManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path.string(), "cannot open for reading");
  try {
    return manifest_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path.string(), std::string("malformed manifest: ") + e.what());
  }
}

/// Hashes every regular file under dir (except the manifest itself) into
/// m.outputs and writes dir/manifest.json.
inline std::filesystem::path write_manifest(const std::filesystem::path& dir, RunManifest m) {
  namespace fs = std::filesystem;
  m.outputs.clear();
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), dir).generic_string();
    if (rel == kManifestName) continue;
    m.outputs[rel] = hash_file(e.path());
  }
  if (m.finished_at.empty()) m.finished_at = utc_timestamp();
  const auto path = dir / kManifestName;
  std::ofstream out(path);
  if (!out) throw IoError(path.string(), "cannot open for writing");
  out << to_json(m).dump(2) << '\n';
  if (!out) throw IoError(path.string(), "write failed");
  return path;
}

/// Checks that every output listed in the manifest exists with the recorded
/// hash; returns the paths that do not.
inline std::vector<std::string> verify_outputs(const std::filesystem::path& dir, const RunManifest& m) {
  std::vector<std::string> bad;
  for (const auto& [rel, h] : m.outputs) {
    const auto p = dir / rel;
    if (!std::filesystem::is_regular_file(p) || hash_file(p) != h) bad.push_back(rel);
  }
  return bad;
}

}  // namespace gcl::report

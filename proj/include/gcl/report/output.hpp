#pragma once

#include <filesystem>
#include <string>

#include "gcl/core/error.hpp"

namespace gcl::report {

/// Throws when `dir` holds files and force is not set, without touching it.
inline void check_output_dir(const std::filesystem::path& dir, bool force) {
  namespace fs = std::filesystem;
  if (dir.empty()) throw Error("no output directory given");
  if (!fs::exists(dir)) return;
  if (!fs::is_directory(dir)) throw IoError(dir.string(), "exists and is not a directory");
  if (!force && !fs::is_empty(dir)) throw IoError(dir.string(), "is not empty (use --force to overwrite)");
}

/// Makes `dir` ready to receive a run's outputs. An existing non-empty
/// directory is refused unless force is set, in which case its contents are
/// removed first so that it ends up holding exactly one run.
inline void prepare_output_dir(const std::filesystem::path& dir, bool force) {
  namespace fs = std::filesystem;
  check_output_dir(dir, force);
  std::error_code ec;
  if (fs::exists(dir)) {
    if (!fs::is_empty(dir)) {
      for (const auto& e : fs::directory_iterator(dir)) fs::remove_all(e.path(), ec);
      if (ec) throw IoError(dir.string(), "cannot clear: " + ec.message());
    }
  }
  fs::create_directories(dir, ec);
  if (ec) throw IoError(dir.string(), ec.message());
}

}  // namespace gcl::report

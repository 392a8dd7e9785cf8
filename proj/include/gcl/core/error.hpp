#pragma once

#include <stdexcept>
#include <string>

namespace gcl {

/// Raised for contract violations on public entry points (bad factor levels,
/// shape mismatches, unknown layer names, malformed configuration, ...).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when a numeric invariant breaks at runtime (non-finite loss or
/// gradient, degenerate statistics).
class NumericError : public Error {
 public:
  using Error::Error;
};

/// File-system or codec failure; the message always names the path.
class IoError : public Error {
 public:
  IoError(const std::string& path, const std::string& what)
      : Error(path + ": " + what), path_(path) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

}  // namespace gcl

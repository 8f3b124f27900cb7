#pragma once

#include <stdexcept>
#include <string>

namespace spamgan {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct MissingFileError : std::runtime_error {
  explicit MissingFileError(const std::string& path) : std::runtime_error("file not found: " + path), path(path) {}
  std::string path;
};

/// Malformed input record; `line` is 1-based.
struct DataFormatError : std::runtime_error {
  DataFormatError(const std::string& source, int line, const std::string& what)
      : std::runtime_error(source + ":" + std::to_string(line) + ": " + what), line(line) {}
  int line;
};

struct NonFiniteLossError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace spamgan

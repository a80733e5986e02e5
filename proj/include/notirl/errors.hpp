#pragma once

#include <stdexcept>
#include <string>

namespace notirl {

// Error taxonomy shared by the library and the CLI. The CLI maps each class
// to a distinct process exit code (config/usage -> 1, data/schema -> 2,
// numerical -> 3), so library code should pick the class by root cause, not
// by where the throw happens to live.

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace notirl

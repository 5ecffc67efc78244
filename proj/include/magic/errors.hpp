#pragma once

#include <stdexcept>
#include <string>

namespace magic {

// bad config file or invalid configuration values
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// malformed on-disk artifacts (samples, checkpoints, reports)
struct FormatError : std::runtime_error {
  explicit FormatError(const std::string& msg) : std::runtime_error(msg) {}
};

// non-finite values where finite ones are required
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace magic

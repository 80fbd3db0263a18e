#pragma once

#include <stdexcept>
#include <string>

namespace ato {

// Invalid model or experiment configuration (CLI exit code 2).
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Enumeration / state-space guard exceeded (CLI exit code 3).
struct SizeError : std::runtime_error {
  explicit SizeError(const std::string& what) : std::runtime_error(what) {}
};

// Structural failure detected at run time (reducible chain, broken sandwich order).
struct ModelError : std::runtime_error {
  explicit ModelError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace ato

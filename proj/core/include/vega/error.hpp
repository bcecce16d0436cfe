#pragma once

#include <stdexcept>
#include <string>

namespace vega {

// Invalid input, precondition violation, malformed file. Maps to CLI exit code 1.
class ValidationError : public std::invalid_argument {
 public:
  explicit ValidationError(const std::string& what) : std::invalid_argument(what) {}
};

// Failure while running an otherwise valid request (e.g. a diverging loss). Exit code 2.
class RuntimeFailure : public std::runtime_error {
 public:
  explicit RuntimeFailure(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace vega

#pragma once

#include <stdexcept>
#include <string>

namespace nsum {

/// Bad inputs: malformed files, inconsistent metadata, out-of-range
/// parameters, preconditions not met.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

/// A numeric safeguard fired (e.g. a nonpositive predicted inverse degree
/// ratio with no clamp configured).
class NumericGuardError : public std::runtime_error {
 public:
  explicit NumericGuardError(const std::string& what) : std::runtime_error(what) {}
};

/// Filesystem-level failures: unreadable or unwritable paths.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace nsum

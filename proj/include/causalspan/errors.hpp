#pragma once

#include <stdexcept>
#include <string>

namespace causalspan {

/// Base class for all toolkit errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// A file could not be read or written.
class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(what) {}
};

/// Input violated a documented format, schema, or invariant.
class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what) : Error(what) {}
};

}  // namespace causalspan

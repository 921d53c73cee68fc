#pragma once

#include <stdexcept>
#include <string>

namespace relit {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input data, bad arguments or violated preconditions.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// File system and codec failures.
class IoError : public Error {
 public:
  using Error::Error;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw ValidationError(message);
}

}  // namespace relit

#pragma once

#include <stdexcept>
#include <string>

namespace edutier {

// Exception hierarchy. The CLI maps each kind onto a fixed exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad flags or arguments (exit 1).
class UsageError : public Error {
 public:
  using Error::Error;
};

// Malformed, out-of-range or inconsistent input data (exit 2).
class DataError : public Error {
 public:
  using Error::Error;
};

// A broken internal invariant (exit 3).
class InvariantError : public Error {
 public:
  using Error::Error;
};

inline void require(bool cond, const std::string& what) {
  if (!cond) throw InvariantError(what);
}

}  // namespace edutier

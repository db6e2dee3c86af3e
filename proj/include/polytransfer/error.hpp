#pragma once

#include <stdexcept>
#include <string>

namespace polytransfer {

// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// A numerical procedure could not produce a trustworthy answer (rank
// deficiency, exhausted rejection budget, non-finite values, divergence).
class NumericalFailure : public Error {
 public:
  using Error::Error;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw InvalidArgument(message);
}

inline void require_dim(std::size_t got, std::size_t want, const char* what) {
  if (got != want)
    throw DimensionMismatch(std::string(what) + ": expected dimension " + std::to_string(want) +
                            ", got " + std::to_string(got));
}

}  // namespace polytransfer

#pragma once

#include <stdexcept>
#include <string>

namespace roverplan {

// Base of every error raised by the library. The CLI maps subclasses to exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor or layer shapes disagree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Map or scene generation exhausted its retry budget.
class GenerationError : public Error {
 public:
  using Error::Error;
};

// Malformed, truncated or inconsistent file.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Checkpoint architecture fingerprint does not match the model.
class FingerprintError : public Error {
 public:
  using Error::Error;
};

// API misuse: backward without forward, bad arguments, violated preconditions.
class UsageError : public Error {
 public:
  using Error::Error;
};

// Training produced a non-finite loss or gradient.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace roverplan

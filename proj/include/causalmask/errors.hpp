#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace causalmask {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shape disagreement between operands; message names the offending operand or layer.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Backward called with a tape that is default-constructed, moved-from, or was
// produced by parameters other than the ones supplied.
class InvalidTapeError : public Error {
 public:
  using Error::Error;
};

// A non-finite value entered a gradient or loss; message names the term/parameter.
class PoisonedError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Batch too small for the requested estimator (median needs n>=2, HSIC n>=4).
class InsufficientBatchError : public Error {
 public:
  using Error::Error;
};

// Malformed file content; carries the byte offset where parsing failed when
// one is meaningful (semantic errors discovered after parsing report offset 0
// without the suffix).
class FormatError : public Error {
 public:
  explicit FormatError(const std::string& message) : Error(message) {}
  FormatError(const std::string& message, std::size_t offset)
      : Error(message + " (byte offset " + std::to_string(offset) + ")"), offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_ = 0;
};

// Metric undefined on the given input (e.g. average precision with no positives).
class MetricError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace causalmask

#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

namespace cova {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration or command line input. Maps to CLI exit code 2.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed or inconsistent data. Maps to CLI exit code 3.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Parse failure in a persisted file. Carries the offending frame index when known.
class ParseError : public DataError {
 public:
  explicit ParseError(const std::string& what, std::optional<std::int64_t> frame = std::nullopt);
  std::optional<std::int64_t> frame_index() const noexcept { return frame_; }

 private:
  std::optional<std::int64_t> frame_;
};

class ShapeError : public DataError {
 public:
  using DataError::DataError;
};

class BoundsError : public DataError {
 public:
  using DataError::DataError;
};

/// Stream layout violates GoP structure (e.g. does not open with an I-frame).
class StructureError : public DataError {
 public:
  using DataError::DataError;
};

class InputError : public DataError {
 public:
  using DataError::DataError;
};

class SequencingError : public DataError {
 public:
  using DataError::DataError;
};

class EvaluationError : public DataError {
 public:
  using DataError::DataError;
};

/// Training produced a non-finite loss.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, int epoch);
  int epoch() const noexcept { return epoch_; }

 private:
  int epoch_;
};

/// Broken internal invariant; indicates a bug rather than bad input.
class InvariantError : public Error {
 public:
  using Error::Error;
};

}  // namespace cova

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace superbunch {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid parameters or an unusable sampling grid.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Input outside an operation's domain (non-finite values, grid mismatch, unsorted data).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Input that is well-formed but carries no usable information (empty channel, empty file).
class DegenerateInputError : public DomainError {
 public:
  using DomainError::DomainError;
};

/// Detector timing too coarse for the requested count rate.
class ResolutionError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

/// Malformed photon-stream file. `position()` is a 1-based line for text
/// files and a byte offset for binary files.
class ParseError : public DomainError {
 public:
  ParseError(const std::string& what, std::uint64_t position)
      : DomainError(what), position_(position) {}
  std::uint64_t position() const noexcept { return position_; }

 private:
  std::uint64_t position_;
};

/// A fit or iterative computation failed to converge.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace superbunch

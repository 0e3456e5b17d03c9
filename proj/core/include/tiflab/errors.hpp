// Copyright 2026 The tiflab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace tiflab {

// Root of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor shape or length precondition failed.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Sequence longer than a model's configured maximum length.
class LengthError : public ShapeError {
 public:
  using ShapeError::ShapeError;
};

// Caller broke an operation's precondition.
class ContractViolation : public Error {
 public:
  using Error::Error;
};

// Invalid configuration value. `pointer` is a JSON pointer to the offending
// field when the value came from a config document.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what, std::string pointer = {})
      : Error(pointer.empty() ? what : pointer + ": " + what), pointer_(std::move(pointer)) {}
  const std::string& pointer() const noexcept { return pointer_; }

 private:
  std::string pointer_;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class SchemaError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf in a computation, or a training run that diverged.
class NumericError : public Error {
 public:
  using Error::Error;
};

// A pipeline stage ran before the artifacts it needs exist.
class PrerequisiteError : public Error {
 public:
  using Error::Error;
};

}  // namespace tiflab

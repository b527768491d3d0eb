// Copyright 2026 The TopicDiff Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef TOPICDIFF_ERROR_HPP_
#define TOPICDIFF_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace topicdiff {

/// Broken precondition: bad argument, bad configuration, misuse of an API.
class ContractError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Tensor shapes do not conform for an operation.
class ShapeError : public ContractError {
 public:
  using ContractError::ContractError;
};

/// Argument outside a function's mathematical domain (e.g. log of a non-positive value).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A NaN or Inf showed up where finite values are required.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input text (JSON, JSONL). Carries the 1-based line number when known.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, long line = 0)
      : std::runtime_error(what), line_(line) {}
  long line() const noexcept { return line_; }

 private:
  long line_;
};

/// Well-formed input that violates the dataset schema.
class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Training diverged (non-finite loss). Carries epoch/step context in the message.
class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A diagnostic oracle exceeded its tolerance.
class OracleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace topicdiff

#endif  // TOPICDIFF_ERROR_HPP_

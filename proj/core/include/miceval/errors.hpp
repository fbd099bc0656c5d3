#pragma once

#include <stdexcept>
#include <string>

namespace miceval {

/// Base class for all errors raised by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input that could not be parsed (corpus lines, judge replies).
class ParseError : public Error {
 public:
  using Error::Error;
};

/// A record violates a declared invariant (sample count, empty text, ...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// A response points at a query that does not exist.
class ReferenceError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Not enough data points to compute a statistic or metric.
class InsufficientDataError : public Error {
 public:
  using Error::Error;
};

/// Statistic is mathematically undefined on this input (zero mean CV,
/// zero-variance correlation, all-tied ranks).
class UndefinedStatError : public Error {
 public:
  using Error::Error;
};

/// Judge call failed. Transport failures are retried by the judge client
/// before this reaches the call site.
class JudgeError : public Error {
 public:
  using Error::Error;
};

/// Backend round trip failed (connection, HTTP status, missing fields).
class TransportError : public JudgeError {
 public:
  using JudgeError::JudgeError;
};

/// Judge replied but the reply does not parse for the task at hand.
class JudgeParseError : public JudgeError {
 public:
  using JudgeError::JudgeError;
};

/// annotate_corpus aggregate failure rate exceeded the configured ceiling.
class AnnotationError : public Error {
 public:
  using Error::Error;
};

}  // namespace miceval

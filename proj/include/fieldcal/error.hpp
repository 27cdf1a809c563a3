#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace fieldcal {

// Base of everything thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Errors caused by user input or data (CLI exit code 2). Everything else
// derived directly from Error is treated as an internal failure.
class DataError : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class NotPositiveDefinite : public Error {
 public:
  using Error::Error;
};

class NotPSD : public Error {
 public:
  using Error::Error;
};

class NonFiniteObjective : public Error {
 public:
  using Error::Error;
};

class OptimizationFailed : public Error {
 public:
  using Error::Error;
};

class TooFewObservations : public DataError {
 public:
  using DataError::DataError;
};

class ParseError : public DataError {
 public:
  ParseError(std::size_t line, const std::string& reason)
      : DataError("line " + std::to_string(line) + ": " + reason), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class DuplicateStation : public DataError {
 public:
  using DataError::DataError;
};

class HeaderMismatch : public DataError {
 public:
  using DataError::DataError;
};

class ShortFile : public DataError {
 public:
  using DataError::DataError;
};

class OutOfDomain : public DataError {
 public:
  using DataError::DataError;
};

class MissingNeighbor : public DataError {
 public:
  using DataError::DataError;
};

class EmptyDataset : public DataError {
 public:
  using DataError::DataError;
};

class EmptyBin : public DataError {
 public:
  using DataError::DataError;
};

class UnknownEvent : public DataError {
 public:
  using DataError::DataError;
};

class InsufficientStations : public DataError {
 public:
  using DataError::DataError;
};

}  // namespace fieldcal

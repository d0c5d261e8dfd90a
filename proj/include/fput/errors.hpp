#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace fput {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An argument lies outside the domain of the operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Filesystem or stream failure.
class IoError : public Error {
 public:
  using Error::Error;
};

/// A trajectory file is malformed: bad magic, wrong version, truncation.
class FormatError : public Error {
 public:
  using Error::Error;
};

class ChecksumError : public FormatError {
 public:
  using FormatError::FormatError;
};

/// The integrator produced a non-finite or runaway coordinate.
class IntegrationBlowup : public Error {
 public:
  IntegrationBlowup(const std::string& what, std::uint64_t step)
      : Error(what), step_(step) {}
  std::uint64_t step() const noexcept { return step_; }

 private:
  std::uint64_t step_;
};

/// A data column has zero variance and cannot be standardized.
class DegenerateColumn : public Error {
 public:
  DegenerateColumn(const std::string& what, std::size_t column)
      : Error(what), column_(column) {}
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t column_;
};

/// An iterative numerical method failed to converge.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class OptimizationBlowup : public Error {
 public:
  OptimizationBlowup(const std::string& what, int iteration)
      : Error(what), iteration_(iteration) {}
  int iteration() const noexcept { return iteration_; }

 private:
  int iteration_;
};

}  // namespace fput

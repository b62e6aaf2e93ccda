#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace resalloc {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of an operation (non-finite
/// resource, non-positive variance, exponent out of range, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Derivative requested at a point where it diverges, e.g. r^alpha at r = 0.
class DerivativeSingularity : public DomainError {
 public:
  using DomainError::DomainError;
};

/// Input sizes do not agree with each other.
class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

/// Every source carries infinite loss, so no aggregate can be formed.
class NoInformationError : public Error {
 public:
  using Error::Error;
};

/// A coordinate of the parameter is not observed by any usable source.
class UnobservableCoordinate : public Error {
 public:
  UnobservableCoordinate(std::size_t coordinate, const std::string& what)
      : Error(what), coordinate_(coordinate) {}

  /// Zero-based index of the offending coordinate.
  std::size_t coordinate() const noexcept { return coordinate_; }

 private:
  std::size_t coordinate_;
};

/// Constraint set is empty (e.g. lower bounds exceed the budget).
class InfeasibleConstraint : public Error {
 public:
  using Error::Error;
};

/// Design matrix is numerically rank deficient.
class RankDeficient : public Error {
 public:
  using Error::Error;
};

/// Input file cannot be opened or read.
class InputError : public Error {
 public:
  using Error::Error;
};

/// Input text is not well formed (JSON or CSV syntax).
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Well-formed input that does not match the expected structure. `path`
/// locates the offending field, e.g. "$.sources[2].support[1]".
class SchemaError : public Error {
 public:
  SchemaError(std::string path, const std::string& what)
      : Error(path + ": " + what), path_(std::move(path)) {}

  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

/// Structurally valid input with inconsistent content, e.g. a support index
/// beyond the dimension or an unobserved coordinate.
class SemanticError : public Error {
 public:
  SemanticError(std::string path, const std::string& what)
      : Error(path + ": " + what), path_(std::move(path)) {}

  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

}  // namespace resalloc

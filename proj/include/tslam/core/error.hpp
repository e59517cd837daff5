#pragma once

#include <stdexcept>
#include <string>

namespace tslam {

/// Category of a failure. The numeric values double as CLI exit codes.
enum class ErrorKind : int {
  Internal = 1,
  BadInput = 2,
  EmptyResult = 3,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Argument outside the mathematical domain of an operation (e.g. SE(3) log
/// at a rotation angle of pi).
class DomainError : public Error {
 public:
  explicit DomainError(const std::string& what)
      : Error(ErrorKind::BadInput, what) {}
};

/// Rasters or vectors whose dimensions do not agree.
class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& what)
      : Error(ErrorKind::BadInput, what) {}
};

class InvalidArgument : public Error {
 public:
  explicit InvalidArgument(const std::string& what)
      : Error(ErrorKind::BadInput, what) {}
};

/// Too few overlapping pixels for a direct alignment to be meaningful.
class DegenerateOverlap : public Error {
 public:
  DegenerateOverlap(const std::string& what, double valid_fraction)
      : Error(ErrorKind::BadInput, what), valid_fraction_(valid_fraction) {}

  double valid_fraction() const noexcept { return valid_fraction_; }

 private:
  double valid_fraction_;
};

class EmptyResult : public Error {
 public:
  explicit EmptyResult(const std::string& what)
      : Error(ErrorKind::EmptyResult, what) {}
};

}  // namespace tslam

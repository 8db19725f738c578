#pragma once

#include <stdexcept>
#include <string>

namespace hdstat {

// Precondition violated by the caller (bad dimension, negative threshold, ...).
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// An iterative or numerical procedure could not produce a trustworthy value.
class NumericFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Design matrix without full column rank.
class SingularDesign : public NumericFailure {
 public:
  SingularDesign(const std::string& what, long deficient_columns)
      : NumericFailure(what), deficient_columns_(deficient_columns) {}

  long deficient_columns() const noexcept { return deficient_columns_; }

 private:
  long deficient_columns_;
};

// A file could not be read or written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline void require(bool condition, const std::string& message) {
  if (!condition) throw InvalidArgument(message);
}

}  // namespace detail
}  // namespace hdstat

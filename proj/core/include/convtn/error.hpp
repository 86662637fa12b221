#pragma once

#include <stdexcept>
#include <string>

namespace convtn {

enum class ErrorCode {
  ShapeMismatch,
  OutOfBounds,
  ParseError,
  SizeConflict,
  UnderdeterminedGroup,
  InvalidHyperParams,
  BoundaryPixels,
  Unsupported,
  InvalidProbability,
  DivisionByZero,
  ConfigError,
};

const char* to_string(ErrorCode code) noexcept;

/// Single exception type of the library; callers dispatch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace convtn

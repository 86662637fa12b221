#include "convtn/error.hpp"

namespace convtn {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::OutOfBounds: return "OutOfBounds";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::SizeConflict: return "SizeConflict";
    case ErrorCode::UnderdeterminedGroup: return "UnderdeterminedGroup";
    case ErrorCode::InvalidHyperParams: return "InvalidHyperParams";
    case ErrorCode::BoundaryPixels: return "BoundaryPixels";
    case ErrorCode::Unsupported: return "Unsupported";
    case ErrorCode::InvalidProbability: return "InvalidProbability";
    case ErrorCode::DivisionByZero: return "DivisionByZero";
    case ErrorCode::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

}  // namespace convtn

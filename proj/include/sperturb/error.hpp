#pragma once

#include <stdexcept>
#include <string>

namespace sperturb {

/// Error codes for every failure mode the library can signal.
enum class ErrorCode {
  UnknownRegistryId,
  NonPositiveReaction,
  EpsilonOutOfRange,
  BadN,
  DomainError,
  SingularSystem,
  UnsupportedData,
  InsufficientData,
  NonFinite,
  DimensionMismatch,
  BadPartition,
  POutOfRange,
  ParseError,
  IoError,
  EmptyTable,
};

/// Converts an error code to its stable symbolic name.
inline const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::UnknownRegistryId: return "UnknownRegistryId";
    case ErrorCode::NonPositiveReaction: return "NonPositiveReaction";
    case ErrorCode::EpsilonOutOfRange: return "EpsilonOutOfRange";
    case ErrorCode::BadN: return "BadN";
    case ErrorCode::DomainError: return "DomainError";
    case ErrorCode::SingularSystem: return "SingularSystem";
    case ErrorCode::UnsupportedData: return "UnsupportedData";
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::BadPartition: return "BadPartition";
    case ErrorCode::POutOfRange: return "POutOfRange";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::EmptyTable: return "EmptyTable";
  }
  return "UnknownError";
}

/// Library exception type: a code plus a human-readable message.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace sperturb

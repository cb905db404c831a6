#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace qnode {

/// Error categories surfaced by every module. The CLI prints the category
/// name as the first token of its single-line diagnostic.
enum class ErrorKind {
  InvalidArgument,
  ShapeMismatch,
  NonFinite,
  PositivityViolation,
  ZeroVector,
  MalformedTape,
  IoError,
  FormatVersionMismatch,
  CorruptPayload,
};

constexpr std::string_view error_kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::NonFinite: return "NonFinite";
    case ErrorKind::PositivityViolation: return "PositivityViolation";
    case ErrorKind::ZeroVector: return "ZeroVector";
    case ErrorKind::MalformedTape: return "MalformedTape";
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::FormatVersionMismatch: return "FormatVersionMismatch";
    case ErrorKind::CorruptPayload: return "CorruptPayload";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace qnode

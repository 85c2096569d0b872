#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cure {

/// Every failure raised by the library carries one of these kinds. The CLI
/// prints the kind name verbatim and maps it to an exit code.
enum class ErrorKind {
  NonFiniteInput,
  EmptySpectrum,
  DomainError,
  DimensionMismatch,
  DimensionError,
  RoleError,
  EmptyManifest,
  ModeError,
  BadMagic,
  UnsupportedDtype,
  UnsupportedLayout,
  TruncatedPayload,
  IoError,
  SchemaError,
};

constexpr std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::NonFiniteInput: return "NonFiniteInput";
    case ErrorKind::EmptySpectrum: return "EmptySpectrum";
    case ErrorKind::DomainError: return "DomainError";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::DimensionError: return "DimensionError";
    case ErrorKind::RoleError: return "RoleError";
    case ErrorKind::EmptyManifest: return "EmptyManifest";
    case ErrorKind::ModeError: return "ModeError";
    case ErrorKind::BadMagic: return "BadMagic";
    case ErrorKind::UnsupportedDtype: return "UnsupportedDtype";
    case ErrorKind::UnsupportedLayout: return "UnsupportedLayout";
    case ErrorKind::TruncatedPayload: return "TruncatedPayload";
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::SchemaError: return "SchemaError";
  }
  return "Unknown";
}

/// Configuration and file-format problems are the caller's to fix; the rest
/// are numerical or contract violations.
constexpr bool is_config_error(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::ModeError:
    case ErrorKind::BadMagic:
    case ErrorKind::UnsupportedDtype:
    case ErrorKind::UnsupportedLayout:
    case ErrorKind::TruncatedPayload:
    case ErrorKind::IoError:
    case ErrorKind::SchemaError:
      return true;
    default:
      return false;
  }
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message),
        kind_(kind),
        detail_(message) {}

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorKind kind_;
  std::string detail_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace cure

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace carimorph {

enum class ErrorKind {
  Format,
  Io,
  ShapeMismatch,
  Dimension,
  DegenerateGeometry,
  DegenerateConfiguration,
  UndefinedIdentity,
  Batch,
  Solver,
  Registration,
  Boundary,
  DisconnectedBoundary,
  Tally,
  Aggregation,
  Corruption,
  Training,
  InvalidArgument,
};

std::string_view to_string(ErrorKind kind) noexcept;

// Every domain failure in the library is reported through this type; callers
// branch on kind() rather than on a class hierarchy.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind), message_(message) {}

  ErrorKind kind() const noexcept { return kind_; }
  /// The message without the kind prefix.
  const std::string& message() const noexcept { return message_; }

 private:
  ErrorKind kind_;
  std::string message_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) { throw Error(kind, message); }

inline void require(bool condition, ErrorKind kind, const std::string& message) {
  if (!condition) fail(kind, message);
}

inline std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::Format: return "format error";
    case ErrorKind::Io: return "I/O error";
    case ErrorKind::ShapeMismatch: return "shape mismatch";
    case ErrorKind::Dimension: return "dimension error";
    case ErrorKind::DegenerateGeometry: return "degenerate geometry";
    case ErrorKind::DegenerateConfiguration: return "degenerate configuration";
    case ErrorKind::UndefinedIdentity: return "undefined identity";
    case ErrorKind::Batch: return "batch error";
    case ErrorKind::Solver: return "solver error";
    case ErrorKind::Registration: return "registration error";
    case ErrorKind::Boundary: return "boundary error";
    case ErrorKind::DisconnectedBoundary: return "disconnected boundary";
    case ErrorKind::Tally: return "tally error";
    case ErrorKind::Aggregation: return "aggregation error";
    case ErrorKind::Corruption: return "corruption error";
    case ErrorKind::Training: return "training error";
    case ErrorKind::InvalidArgument: return "invalid argument";
  }
  return "error";
}

}  // namespace carimorph

#pragma once

#include <stdexcept>
#include <string>

namespace wchaos {

enum class ErrorKind {
  InvalidDimension,
  SpaceMismatch,
  EmbeddingError,
  OutOfRange,
  UnsupportedOrder,
  NonUnitVector,
  MemoryBudgetExceeded,
  DegenerateGrid,
  NoConvergence,
  Blowup,
  ConfigError,
  IoError,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidDimension: return "invalid-dimension";
    case ErrorKind::SpaceMismatch: return "space-mismatch";
    case ErrorKind::EmbeddingError: return "embedding-error";
    case ErrorKind::OutOfRange: return "out-of-range";
    case ErrorKind::UnsupportedOrder: return "unsupported-order";
    case ErrorKind::NonUnitVector: return "non-unit-vector";
    case ErrorKind::MemoryBudgetExceeded: return "memory-budget-exceeded";
    case ErrorKind::DegenerateGrid: return "degenerate-grid";
    case ErrorKind::NoConvergence: return "no-convergence";
    case ErrorKind::Blowup: return "blowup";
    case ErrorKind::ConfigError: return "config-error";
    case ErrorKind::IoError: return "io-error";
  }
  return "unknown";
}

/// Library exception carrying a machine-checkable kind.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline void require(bool cond, ErrorKind kind, const std::string& what) {
  if (!cond) throw Error(kind, what);
}

}  // namespace wchaos

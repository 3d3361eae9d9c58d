#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace shapecomp {

/// Base class of every error thrown by the library. `kind()` is a stable
/// machine-readable tag used by the CLI's error JSON.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(message), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

/// Violated precondition (shape mismatch, bad index, invalid argument).
class ContractError : public Error {
 public:
  explicit ContractError(const std::string& message) : Error("contract", message) {}
};

/// Requested size exceeds a hard cap.
class BoundError : public Error {
 public:
  explicit BoundError(const std::string& message) : Error("bound_exceeded", message) {}
};

/// Malformed face list or inconsistent connectivity.
class StructureError : public Error {
 public:
  explicit StructureError(const std::string& message) : Error("structure", message) {}
};

/// Two objects bound to different topology fingerprints were combined.
class TopologyError : public Error {
 public:
  explicit TopologyError(const std::string& message) : Error("topology", message) {}
};

/// Text input could not be parsed; carries the 1-based line number.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& message)
      : Error("parse", "line " + std::to_string(line) + ": " + message), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& message) : Error("io", message) {}
};

/// Non-finite intermediate value or degenerate geometry.
class NumericError : public Error {
 public:
  explicit NumericError(const std::string& message) : Error("numeric", message) {}
};

/// An iterative method did not converge within its iteration budget.
class ConvergenceError : public Error {
 public:
  explicit ConvergenceError(const std::string& message) : Error("iteration_limit", message) {}
};

/// An optimization produced a non-finite objective.
class DivergenceError : public Error {
 public:
  DivergenceError(std::size_t iteration, const std::string& message)
      : Error("divergence", "iteration " + std::to_string(iteration) + ": " + message),
        iteration_(iteration) {}

  std::size_t iteration() const noexcept { return iteration_; }

 private:
  std::size_t iteration_;
};

class CheckpointError : public Error {
 public:
  enum class Reason { kVersion, kFingerprint, kCorrupt };

  CheckpointError(Reason reason, const std::string& message)
      : Error(tag(reason), message), reason_(reason) {}

  Reason reason() const noexcept { return reason_; }

 private:
  static std::string tag(Reason r) {
    switch (r) {
      case Reason::kVersion: return "checkpoint_version";
      case Reason::kFingerprint: return "checkpoint_fingerprint";
      case Reason::kCorrupt: return "checkpoint_corrupt";
    }
    return "checkpoint";
  }
  Reason reason_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& message) : Error("config", message) {}
};

}  // namespace shapecomp

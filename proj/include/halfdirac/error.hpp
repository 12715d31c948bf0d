#pragma once

#include <stdexcept>
#include <string>

namespace halfdirac {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& what)
      : std::runtime_error(what), code_(std::move(code)) {}

  /// Short machine-readable tag, e.g. "cover_violation".
  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

/// A precondition on the inputs failed; nothing was computed.
class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what) : Error("validation", what) {}
  ValidationError(std::string code, const std::string& what)
      : Error(std::move(code), what) {}
};

/// The computation ran but could not certify its result (cover violation,
/// inadequate sampling, integration blow-up, ...).
class ComputationError : public Error {
 public:
  ComputationError(std::string code, const std::string& what)
      : Error(std::move(code), what) {}
};

}  // namespace halfdirac

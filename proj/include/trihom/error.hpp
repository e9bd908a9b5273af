#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace trihom {

enum class ErrorKind {
  InvalidArgument,
  InvalidShape,
  DisconnectedSubdomain,
  UnknownLabel,
  EmptyInterface,
  NoConvergence,
  Incompatible,
  MissingCorrector,
  ResidualTooHigh,
  NonPositiveInput,
  NonFinite,
  GridMismatch,
  ConfigError,
};

std::string_view to_string(ErrorKind kind);

/// Library failure with one of the kinds above.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool condition, ErrorKind kind, const std::string& what) {
  if (!condition) fail(kind, what);
}

}  // namespace trihom

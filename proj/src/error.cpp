#include "trihom/error.hpp"

namespace trihom {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::InvalidShape: return "InvalidShape";
    case ErrorKind::DisconnectedSubdomain: return "DisconnectedSubdomain";
    case ErrorKind::UnknownLabel: return "UnknownLabel";
    case ErrorKind::EmptyInterface: return "EmptyInterface";
    case ErrorKind::NoConvergence: return "NoConvergence";
    case ErrorKind::Incompatible: return "Incompatible";
    case ErrorKind::MissingCorrector: return "MissingCorrector";
    case ErrorKind::ResidualTooHigh: return "ResidualTooHigh";
    case ErrorKind::NonPositiveInput: return "NonPositiveInput";
    case ErrorKind::NonFinite: return "NonFinite";
    case ErrorKind::GridMismatch: return "GridMismatch";
    case ErrorKind::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

}  // namespace trihom

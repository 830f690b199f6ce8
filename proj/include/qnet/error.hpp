#pragma once

#include <complex>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace qnet {

enum class ErrorCode {
  NonInvertible,
  DimensionMismatch,
  InvalidArgument,
  DegenerateCoupling,
  AmbiguousPairing,
  SingularAt,
  Unsupported,
  NotPassive,
  UnknownNode,
  UnstableSimulation,
  InsufficientDecay,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NonInvertible: return "non-invertible";
    case ErrorCode::DimensionMismatch: return "dimension-mismatch";
    case ErrorCode::InvalidArgument: return "invalid-argument";
    case ErrorCode::DegenerateCoupling: return "degenerate-coupling";
    case ErrorCode::AmbiguousPairing: return "ambiguous-pairing";
    case ErrorCode::SingularAt: return "singular-at";
    case ErrorCode::Unsupported: return "unsupported";
    case ErrorCode::NotPassive: return "not-passive";
    case ErrorCode::UnknownNode: return "unknown-node";
    case ErrorCode::UnstableSimulation: return "unstable-simulation";
    case ErrorCode::InsufficientDecay: return "insufficient-decay";
  }
  return "unknown";
}

/// Library-wide exception. SingularAt errors also carry the offending s.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Error(ErrorCode code, const std::string& what, std::complex<double> s)
      : std::runtime_error(std::string(to_string(code)) + ": " + what + " at s=(" +
                           std::to_string(s.real()) + "," + std::to_string(s.imag()) + ")"),
        code_(code),
        s_(s) {}

  ErrorCode code() const noexcept { return code_; }
  std::optional<std::complex<double>> s() const noexcept { return s_; }

 private:
  ErrorCode code_;
  std::optional<std::complex<double>> s_;
};

}  // namespace qnet

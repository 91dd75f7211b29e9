#pragma once

#include <stdexcept>
#include <string>

namespace eplab {

/// Failure categories raised by the library. The CLI maps them onto exit codes.
enum class Errc {
  unsupported_spec,
  resolution_too_low,
  invalid_spec,
  dimension_mismatch,
  non_finite_field,
  hessian_unavailable,
  unresolved_kernel,
  domain_too_small,
  solve_failure,
  positivity_loss,
  mass_drift,
  non_normalized,
  zero_density,
  boundary_index,
  alpha_out_of_range,
  trace_too_short,
  cfl_violation,
  extinction_reached,
  history_missing,
  non_positive_tau,
  compact_manifold,
  config_error,
};

inline const char* errc_name(Errc c) {
  switch (c) {
    case Errc::unsupported_spec: return "UnsupportedSpec";
    case Errc::resolution_too_low: return "ResolutionTooLow";
    case Errc::invalid_spec: return "InvalidSpec";
    case Errc::dimension_mismatch: return "DimensionMismatch";
    case Errc::non_finite_field: return "NonFiniteField";
    case Errc::hessian_unavailable: return "HessianUnavailable";
    case Errc::unresolved_kernel: return "UnresolvedKernel";
    case Errc::domain_too_small: return "DomainTooSmall";
    case Errc::solve_failure: return "SolveFailure";
    case Errc::positivity_loss: return "PositivityLoss";
    case Errc::mass_drift: return "MassDrift";
    case Errc::non_normalized: return "NonNormalized";
    case Errc::zero_density: return "ZeroDensity";
    case Errc::boundary_index: return "BoundaryIndex";
    case Errc::alpha_out_of_range: return "AlphaOutOfRange";
    case Errc::trace_too_short: return "TraceTooShort";
    case Errc::cfl_violation: return "CflViolation";
    case Errc::extinction_reached: return "ExtinctionReached";
    case Errc::history_missing: return "HistoryMissing";
    case Errc::non_positive_tau: return "NonPositiveTau";
    case Errc::compact_manifold: return "CompactManifold";
    case Errc::config_error: return "ConfigError";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

// Errors that mean the scenario description itself is unusable.
inline bool is_configuration_error(Errc c) {
  switch (c) {
    case Errc::config_error:
    case Errc::unsupported_spec:
    case Errc::resolution_too_low:
    case Errc::invalid_spec:
    case Errc::dimension_mismatch:
    case Errc::unresolved_kernel:
    case Errc::domain_too_small:
    case Errc::compact_manifold:
      return true;
    default:
      return false;
  }
}

}  // namespace eplab

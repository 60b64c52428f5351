// Shared constants, error types and small numeric helpers.
#ifndef JBASIM_CORE_HPP
#define JBASIM_CORE_HPP

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <string_view>

namespace jbasim {

// Unit system: frequencies in GHz, times in ns, angular rates in rad/ns.
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;
inline constexpr double kPlanck = 6.62607015e-34;     // J s
inline constexpr double kBoltzmann = 1.380649e-23;    // J/K

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// Angular rate in rad/ns for an ordinary frequency in GHz.
constexpr double angular(double f_ghz) { return kTwoPi * f_ghz; }

enum class ErrorKind {
  kInvalidArgument,
  kConvergence,
  kOutOfRange,
  kDispersiveViolation,
  kTruncation,
  kNoBistability,
  kStability,
  kDivergence,
  kOverlap,
  kResolution,
  kFit,
  kInconsistency,
  kConditioning,
  kConfig,
  kUnsupported,
};

constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidArgument: return "invalid_argument";
    case ErrorKind::kConvergence: return "convergence";
    case ErrorKind::kOutOfRange: return "out_of_range";
    case ErrorKind::kDispersiveViolation: return "dispersive_violation";
    case ErrorKind::kTruncation: return "truncation";
    case ErrorKind::kNoBistability: return "no_bistability";
    case ErrorKind::kStability: return "stability";
    case ErrorKind::kDivergence: return "divergence";
    case ErrorKind::kOverlap: return "overlap";
    case ErrorKind::kResolution: return "resolution";
    case ErrorKind::kFit: return "fit";
    case ErrorKind::kInconsistency: return "inconsistency";
    case ErrorKind::kConditioning: return "conditioning";
    case ErrorKind::kConfig: return "config";
    case ErrorKind::kUnsupported: return "unsupported";
  }
  return "unknown";
}

/// Every failure raised by the library carries a machine-readable category.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind), message_(message) {}

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& message() const noexcept { return message_; }

 private:
  ErrorKind kind_;
  std::string message_;
};

inline void require(bool condition, ErrorKind kind, const std::string& message) {
  if (!condition) throw Error(kind, message);
}

/// Mean thermal occupation of a mode at `f_ghz` and temperature `kelvin`.
inline double bose_occupation(double f_ghz, double kelvin) {
  if (kelvin <= 0.0) return 0.0;
  const double x = kPlanck * f_ghz * 1e9 / (kBoltzmann * kelvin);
  return 1.0 / std::expm1(x);
}

inline double db_to_power_ratio(double db) { return std::pow(10.0, db / 10.0); }
inline double db_to_amplitude_ratio(double db) { return std::pow(10.0, db / 20.0); }

}  // namespace jbasim

#endif  // JBASIM_CORE_HPP

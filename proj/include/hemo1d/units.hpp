#pragma once

#include <numbers>
#include <stdexcept>
#include <string>

namespace hemo1d {

inline constexpr double kPi = std::numbers::pi;

// All quantities are CGS unless a name says otherwise.
inline constexpr double kMmHg = 1333.22;            // g/cm/s^2 per mmHg
inline constexpr double kLitrePerMinute = 1000.0 / 60.0;  // mL/s per L/min

inline double to_mmhg(double p) { return p / kMmHg; }
inline double from_mmhg(double p_mmhg) { return p_mmhg * kMmHg; }

/// Malformed input files or values that violate a documented invariant.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class TopologyError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// Failures of a numerical procedure (instability, non-convergence, singular
/// limits) as opposed to bad input.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace hemo1d

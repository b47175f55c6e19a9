#pragma once

namespace hemo1d {

/// How the radius-dependent stiffness exponent is read.
///
/// kDecaying uses exp(-|k2| r0) so stiffness falls with radius; kLiteral uses
/// exp(-k2 r0) with k2 taken at face value (a growing exponential for the
/// tabulated k2 = -35 1/cm).
enum class StiffnessConvention { kDecaying, kLiteral };

struct StiffnessParams {
  double k1 = 2.0e6;   // g/cm/s^2
  double k2 = -35.0;   // 1/cm
  double k3 = 3.8e5;   // g/cm/s^2
  StiffnessConvention convention = StiffnessConvention::kDecaying;

  /// Exponent rate applied as exp(-rate * r0).
  double decay_rate() const;
  bool operator==(const StiffnessParams&) const = default;
};

/// Eh/r0 = k1 exp(-k2 r0) + k3 (g/cm/s^2).
double stiffness(double r0, const StiffnessParams& params);

/// d(Eh/r0)/dr0.
double stiffness_slope(double r0, const StiffnessParams& params);

/// Linear elastic membrane law linking pressure and cross-sectional area at a
/// single axial location.
struct WallLaw {
  double p0 = 0.0;          // reference pressure, g/cm/s^2
  double r0 = 1.0;          // reference radius, cm
  double a0 = 0.0;          // reference area pi r0^2, cm^2
  double eh_over_r0 = 0.0;  // cached stiffness, g/cm/s^2

  static WallLaw make(double r0, const StiffnessParams& params, double p0 = 0.0);

  /// Asymptotic pressure as A -> infinity.
  double pressure_ceiling() const;
};

/// p = p0 + (4/3)(Eh/r0)(1 - sqrt(A0/A)). Throws ValidationError for A <= 0.
double pressure_from_area(double area, const WallLaw& law);

/// Exact inverse of pressure_from_area. Throws NumericalError at or above the
/// pressure ceiling.
double area_from_pressure(double pressure, const WallLaw& law);

/// dA/dp at A = A0, i.e. (3/2) A0 / (Eh/r0).
double compliance_at_reference(const WallLaw& law);

/// c0 = sqrt((2/3)(Eh/r0)/rho).
double wave_speed_reference(const WallLaw& law, double rho);

}  // namespace hemo1d

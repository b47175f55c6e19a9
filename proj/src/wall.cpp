#include "hemo1d/wall.hpp"

#include <cmath>

#include <fmt/format.h>

#include "hemo1d/units.hpp"

namespace hemo1d {

double StiffnessParams::decay_rate() const {
  return convention == StiffnessConvention::kDecaying ? std::abs(k2) : k2;
}

double stiffness(double r0, const StiffnessParams& params) {
  return params.k1 * std::exp(-params.decay_rate() * r0) + params.k3;
}

double stiffness_slope(double r0, const StiffnessParams& params) {
  const double rate = params.decay_rate();
  return -rate * params.k1 * std::exp(-rate * r0);
}

WallLaw WallLaw::make(double r0, const StiffnessParams& params, double p0) {
  if (!(r0 > 0.0)) {
    throw ValidationError(fmt::format("wall law: reference radius must be positive (got {})", r0));
  }
  WallLaw law;
  law.p0 = p0;
  law.r0 = r0;
  law.a0 = kPi * r0 * r0;
  law.eh_over_r0 = stiffness(r0, params);
  if (!(law.eh_over_r0 > 0.0)) {
    throw ValidationError(fmt::format("wall law: non-positive stiffness {} at r0 = {}", law.eh_over_r0, r0));
  }
  return law;
}

double WallLaw::pressure_ceiling() const { return p0 + (4.0 / 3.0) * eh_over_r0; }

double pressure_from_area(double area, const WallLaw& law) {
  if (!(area > 0.0)) {
    throw ValidationError(fmt::format("pressure_from_area: non-positive area {}", area));
  }
  return law.p0 + (4.0 / 3.0) * law.eh_over_r0 * (1.0 - std::sqrt(law.a0 / area));
}

double area_from_pressure(double pressure, const WallLaw& law) {
  const double s = 1.0 - 3.0 * (pressure - law.p0) / (4.0 * law.eh_over_r0);
  if (!(s > 0.0)) {
    throw NumericalError(fmt::format(
        "area_from_pressure: pressure {} at or above wall-law ceiling {}", pressure, law.pressure_ceiling()));
  }
  return law.a0 / (s * s);
}

double compliance_at_reference(const WallLaw& law) { return 1.5 * law.a0 / law.eh_over_r0; }

double wave_speed_reference(const WallLaw& law, double rho) {
  return std::sqrt((2.0 / 3.0) * law.eh_over_r0 / rho);
}

}  // namespace hemo1d

// Scenarios shared by the unit tests and the acceptance binary.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <vector>

#include "hemo1d/network.hpp"
#include "hemo1d/solver.hpp"
#include "hemo1d/structured_tree.hpp"
#include "hemo1d/units.hpp"
#include "hemo1d/waveform.hpp"

namespace hemo1d::testing {

inline VesselNetwork single_vessel(double length, double r_in, double r_out, StiffnessParams stiffness = {},
                                   double gravity = 0.0) {
  Vessel v;
  v.id = 1;
  v.name = "test vessel";
  v.length = length;
  v.r_in = r_in;
  v.r_out = r_out;
  v.terminal = true;
  v.orientation = Orientation::kHorizontal;
  FluidParams fluid;
  fluid.g = gravity;
  return VesselNetwork::build({v}, fluid, stiffness);
}

inline Waveform sampled(const std::function<double(double)>& f, double period, int samples) {
  std::vector<double> values(samples);
  for (int i = 0; i < samples; ++i) values[i] = f(period * i / samples);
  return Waveform::uniform(values, period);
}

/// Flow pulse exp(-((t - t0)/width)^2 / 2) * peak repeated every `period`.
inline Waveform gaussian_pulse(double peak, double t0, double width, double period) {
  return sampled([=](double t) { return peak * std::exp(-0.5 * std::pow((t - t0) / width, 2)); }, period, 4000);
}

/// Resistance equal to the characteristic impedance rho c / A0 at the outlet of `v`.
inline double matched_resistance(const VesselNetwork& net, const Vessel& v) {
  const WallLaw law = WallLaw::make(v.r_out, net.stiffness_for(v));
  return net.fluid().rho * wave_speed_reference(law, net.fluid().rho) / (kPi * v.r_out * v.r_out);
}

inline std::map<int, ImpedanceSpectrum> resistive_outlets(const VesselNetwork& net, double period, int samples,
                                                          double scale = 1.0) {
  std::map<int, ImpedanceSpectrum> out;
  for (int id : net.terminal_ids()) {
    out[id] = constant_impedance_spectrum(scale * matched_resistance(net, net.vessel(id)), period, samples);
  }
  return out;
}

/// DC input resistance of a structured tree by brute force: every segment of
/// the explicit binary tree is visited and combined in series and parallel.
inline double explicit_dc(double r, const StructuredTreeSpec& spec) {
  const double segment = 8.0 * spec.fluid.mu * spec.lrr * r / (kPi * r * r * r * r);
  const double ra = spec.alpha * r, rb = spec.beta * r;
  double inverse = 0.0;
  if (ra >= spec.r_min) inverse += 1.0 / explicit_dc(ra, spec);
  if (rb >= spec.r_min) inverse += 1.0 / explicit_dc(rb, spec);
  return inverse == 0.0 ? segment : segment + 1.0 / inverse;
}

struct ConvergenceOrder {
  double order_area = 0.0;
  double order_flow = 0.0;
  double error_coarse = 0.0;  // relative L2 error of q on the coarsest grid
};

/// Smooth pulse on a long uniform vessel solved at dx, dx/2 and a reference
/// dx/8 (four times finer than the finer of the two), with dt halved along
/// with dx. Errors are compared at the coarse nodes at a fixed time, before
/// the pulse reaches the outlet.
inline ConvergenceOrder pulse_convergence_order() {
  const double length = 60.0, radius = 0.5, period = 1.0;
  const VesselNetwork net = single_vessel(length, radius, radius);
  const Waveform inflow = gaussian_pulse(5.0, 0.05, 0.008, period);
  const int base_samples = 4096, base_steps = 400;

  auto solve = [&](int refine) {
    GridConfig grid;
    grid.dx = 0.4 / refine;
    grid.samples_per_period = base_samples * refine;
    Simulation sim(net, inflow, grid, resistive_outlets(net, period, grid.samples_per_period));
    for (int s = 0; s < base_steps * refine; ++s) sim.step();
    return sim.snapshot(1);
  };
  const VesselSnapshot coarse = solve(1), fine = solve(2), reference = solve(8);

  const double a0 = kPi * radius * radius;
  auto error = [&](const VesselSnapshot& s, int stride, bool flow) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < coarse.x.size(); ++i) {
      const double ref = flow ? reference.flow[8 * i] : reference.area[8 * i] - a0;
      const double val = flow ? s.flow[stride * i] : s.area[stride * i] - a0;
      num += (val - ref) * (val - ref);
      den += ref * ref;
    }
    return std::sqrt(num / den);
  };
  ConvergenceOrder r;
  r.order_flow = std::log2(error(coarse, 1, true) / error(fine, 2, true));
  r.order_area = std::log2(error(coarse, 1, false) / error(fine, 2, false));
  r.error_coarse = error(coarse, 1, true);
  return r;
}

/// Ascending aorta with the arch and brachiocephalic trunk as terminal daughters.
inline VesselNetwork y_network(double gravity = 981.0) {
  std::vector<Vessel> vessels(3);
  vessels[0] = {1, "Ascending aorta", 4.07, 1.2, 1.1, std::nullopt, Orientation::kUp, false};
  vessels[1] = {2, "Aortic arch I", 1.95, 1.1, 1.1, 1, Orientation::kHorizontal, true};
  vessels[2] = {3, "Brachiocephalic", 1.23, 0.57, 0.49, 1, Orientation::kUp, true};
  FluidParams fluid;
  fluid.g = gravity;
  return VesselNetwork::build(vessels, fluid, StiffnessParams{});
}

inline std::map<int, ImpedanceSpectrum> tree_outlets(const VesselNetwork& net, double period, int samples) {
  std::map<int, ImpedanceSpectrum> out;
  for (int id : net.terminal_ids()) {
    StructuredTreeSpec spec;
    spec.root_radius = net.vessel(id).r_out;
    spec.fluid = net.fluid();
    spec.stiffness = net.stiffness();
    out[id] = root_impedance_spectrum(spec, period, samples);
  }
  return out;
}

inline bool same_series(const SimulationResult& a, const SimulationResult& b) {
  if (a.stations.size() != b.stations.size() || a.time != b.time) return false;
  for (std::size_t i = 0; i < a.stations.size(); ++i) {
    const StationSeries& s = a.stations[i];
    const StationSeries& t = b.stations[i];
    if (s.vessel_id != t.vessel_id || s.x != t.x || s.pressure != t.pressure || s.flow != t.flow || s.area != t.area) {
      return false;
    }
  }
  return true;
}

}  // namespace hemo1d::testing

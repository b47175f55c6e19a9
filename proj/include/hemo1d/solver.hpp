#pragma once

#include <map>
#include <memory>
#include <span>
#include <vector>

#include "hemo1d/network.hpp"
#include "hemo1d/structured_tree.hpp"
#include "hemo1d/waveform.hpp"

namespace hemo1d {

/// Characteristic scales. The solver works with lengths in units of 1 cm,
/// flows in units of 10 mL/s and density 1, so pressure is measured in
/// rho q_c^2 / r_c^4.
struct Scales {
  double length = 1.0;  // cm
  double flow = 10.0;   // mL/s
  double rho = 1.057;   // g/cm^3

  double time() const { return length * length * length / flow; }
  double pressure() const { return rho * flow * flow / (length * length * length * length); }
  double area() const { return length * length; }
  double velocity() const { return flow / (length * length); }
  double impedance() const { return pressure() / flow; }
};

struct GridConfig {
  double dx = 0.1;              // target spatial step, cm
  int min_points = 8;           // per vessel
  double cfl_safety = 0.5;
  int samples_per_period = 0;   // 0: smallest power of two >= min_samples meeting the CFL estimate
  int min_samples = 1024;
  int max_cycles = 20;
  int min_cycles = 2;
  double periodicity_tolerance = 1e-3;
  int output_samples = 512;     // recorded samples per period, must divide N
  int workers = 1;
  int convolution_block = 256;

  void validate() const;
};

/// Grid points used for a vessel of the given length (odd, so the midpoint is a node).
int grid_points(double length, const GridConfig& grid);

/// Largest stable time step from reference wave speeds at rest, times the safety factor.
double estimate_max_dt(const VesselNetwork& network, const GridConfig& grid);

/// N for one period: grid.samples_per_period if set, otherwise the smallest power of two
/// >= grid.min_samples with T/N <= estimate_max_dt. Throws ValidationError if a fixed N
/// violates the estimate.
int choose_samples_per_period(const VesselNetwork& network, double period, const GridConfig& grid);

/// Outgoing characteristic information at one end of a vessel meeting a
/// boundary. `direction` is +1 at a distal end (W1 = u + Phi leaves the vessel)
/// and -1 at a proximal end (W2 = u - Phi leaves). Units are any consistent set.
struct CharacteristicEnd {
  double a0 = 0.0;
  double f = 0.0;  // (4/3) Eh/r0
  double w = 0.0;  // outgoing invariant
  int direction = 1;
  double area_guess = 0.0;  // 0: use a0
};

/// Phi(A) = 4 sqrt(f / 2 rho) (1 - (A0/A)^(1/4)).
double characteristic_phi(double area, double a0, double f, double rho);

struct JunctionSolution {
  std::vector<double> area;
  std::vector<double> flow;  // positive in the direction of the parent's flow
  int iterations = 0;
  double flow_residual = 0.0;
  double pressure_residual = 0.0;
};

struct JunctionStats {
  int iterations = 0;
  double flow_residual = 0.0;
  double pressure_residual = 0.0;
};

/// Allocation-free form of junction_solve writing into caller storage.
JunctionStats junction_solve_into(std::span<const CharacteristicEnd> ends, double rho, std::span<double> area,
                                  std::span<double> flow);

/// Areas and flows at a branch point: ends[0] is the parent (direction +1), the
/// rest daughters (direction -1). Enforces sum of flows and equal static
/// pressure with damped Newton and an analytic Jacobian. Throws NumericalError
/// when the residual is not below 1e-10 after 50 iterations.
JunctionSolution junction_solve(std::span<const CharacteristicEnd> ends, double rho);

/// Area at a proximal end whose flow is prescribed.
double inlet_area(const CharacteristicEnd& end, double flow, double rho);

/// Area at a distal end where p - p0 = k0 q + history.
double outlet_area(const CharacteristicEnd& end, double k0, double history, double rho);

struct StationRequest {
  int vessel_id = 0;
  double x = 0.0;  // cm
};

struct StationSeries {
  int vessel_id = 0;
  double x = 0.0;                 // cm
  std::vector<double> pressure;   // g/cm/s^2
  std::vector<double> flow;       // mL/s
  std::vector<double> area;       // cm^2
};

struct MassAudit {
  double inflow_volume = 0.0;   // mL
  double outflow_volume = 0.0;  // mL
  double stored_change = 0.0;   // mL
  double relative_error = 0.0;  // |in - out - stored| / |in|
};

struct SimulationResult {
  double period = 0.0;
  double dt = 0.0;
  int samples_per_period = 0;
  int total_grid_points = 0;
  int cycles = 0;
  bool converged = false;
  std::vector<double> cycle_changes;  // relative L2 change after each cycle (first entry is cycle 2)
  std::vector<double> time;           // s, within the last cycle
  std::vector<StationSeries> stations;
  MassAudit mass;
  double max_flow_residual = 0.0;      // nondimensional, over every step
  double max_pressure_residual = 0.0;  // nondimensional, over every step
  int max_newton_iterations = 0;
  long long steps = 0;

  /// Station nearest to x on the given vessel; throws ValidationError if absent.
  const StationSeries& station(int vessel_id, double x) const;
};

struct VesselSnapshot {
  std::vector<double> x;         // cm
  std::vector<double> area;      // cm^2
  std::vector<double> flow;      // mL/s
  std::vector<double> pressure;  // g/cm/s^2
};

/// Time stepper for a whole network. Uses the gravity angles stored on the
/// network; see run_simulation for the posture-aware entry point.
class Simulation {
 public:
  Simulation(const VesselNetwork& network, const Waveform& inflow, const GridConfig& grid,
             const std::map<int, ImpedanceSpectrum>& outlets, std::vector<StationRequest> stations = {});
  ~Simulation();
  Simulation(Simulation&&) noexcept;
  Simulation& operator=(Simulation&&) noexcept;

  void step();
  double time() const;
  long long step_count() const;
  double dt() const;
  int samples_per_period() const;
  const Scales& scales() const;

  VesselSnapshot snapshot(int vessel_id) const;
  /// Replaces the state of one vessel (CGS); arrays must match the grid size.
  void set_state(int vessel_id, std::span<const double> area, std::span<const double> flow);

  double max_flow_residual() const;
  double max_pressure_residual() const;

  /// Runs whole cycles until periodic or max_cycles; returns the last cycle.
  SimulationResult run();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Default stations: both ends and the midpoint of every vessel.
std::vector<StationRequest> default_stations(const VesselNetwork& network);

SimulationResult run_simulation(const VesselNetwork& network, const Waveform& inflow, const GridConfig& grid,
                                Posture posture, const std::map<int, ImpedanceSpectrum>& outlets,
                                std::vector<StationRequest> stations = {});

}  // namespace hemo1d

#include "hemo1d/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "hemo1d/convolution.hpp"
#include "hemo1d/parallel.hpp"
#include "hemo1d/units.hpp"
#include "hemo1d/wall.hpp"

namespace hemo1d {

void GridConfig::validate() const {
  if (!(dx > 0.0)) throw ValidationError(fmt::format("grid: dx must be positive ({})", dx));
  if (min_points < 8) throw ValidationError(fmt::format("grid: min_points must be >= 8 ({})", min_points));
  if (!(cfl_safety > 0.0 && cfl_safety <= 1.0)) throw ValidationError("grid: cfl_safety must lie in (0, 1]");
  if (samples_per_period < 0 || min_samples < 16) throw ValidationError("grid: invalid sample counts");
  if (max_cycles < 1 || min_cycles < 1) throw ValidationError("grid: cycle limits must be >= 1");
  if (!(periodicity_tolerance > 0.0)) throw ValidationError("grid: periodicity tolerance must be positive");
  if (output_samples < 1) throw ValidationError("grid: output_samples must be >= 1");
  if (workers < 1) throw ValidationError("grid: workers must be >= 1");
  if (convolution_block < 1) throw ValidationError("grid: convolution_block must be >= 1");
}

int grid_points(double length, const GridConfig& grid) {
  int intervals = std::max(static_cast<int>(std::ceil(length / grid.dx - 1e-9)), grid.min_points - 1);
  if (intervals % 2 != 0) ++intervals;
  return intervals + 1;
}

double estimate_max_dt(const VesselNetwork& network, const GridConfig& grid) {
  grid.validate();
  double dt = std::numeric_limits<double>::infinity();
  for (const auto& v : network.vessels()) {
    const int n = grid_points(v.length, grid);
    const double dx = v.length / (n - 1);
    const StiffnessParams params = network.stiffness_for(v);
    double c_max = 0.0;
    for (int i = 0; i < n; ++i) {
      const WallLaw law = WallLaw::make(radius_at(v.taper, std::min(dx * i, v.length)), params);
      c_max = std::max(c_max, wave_speed_reference(law, network.fluid().rho));
    }
    dt = std::min(dt, dx / c_max);
  }
  return grid.cfl_safety * dt;
}

int choose_samples_per_period(const VesselNetwork& network, double period, const GridConfig& grid) {
  const double dt_max = estimate_max_dt(network, grid);
  if (grid.samples_per_period > 0) {
    if (period / grid.samples_per_period > dt_max * (1.0 + 1e-12)) {
      throw ValidationError(fmt::format("grid: {} samples per period gives dt = {:.3e} s above the CFL estimate {:.3e} s",
                                        grid.samples_per_period, period / grid.samples_per_period, dt_max));
    }
    return grid.samples_per_period;
  }
  long long n = 1;
  while (n < grid.min_samples || period / n > dt_max) {
    n *= 2;
    if (n > (1LL << 26)) throw ValidationError("grid: time step requirement exceeds 2^26 samples per period");
  }
  return static_cast<int>(n);
}

const StationSeries& SimulationResult::station(int vessel_id, double x) const {
  const StationSeries* best = nullptr;
  for (const auto& s : stations) {
    if (s.vessel_id != vessel_id) continue;
    if (!best || std::abs(s.x - x) < std::abs(best->x - x)) best = &s;
  }
  if (!best) throw ValidationError(fmt::format("no recorded station on vessel {}", vessel_id));
  return *best;
}

std::vector<StationRequest> default_stations(const VesselNetwork& network) {
  std::vector<StationRequest> out;
  for (const auto& v : network.vessels()) {
    out.push_back({v.id, 0.0});
    out.push_back({v.id, 0.5 * v.length});
    out.push_back({v.id, v.length});
  }
  return out;
}

namespace {

// Per-vessel grid data in nondimensional units.
struct VesselGrid {
  int id = 0;
  int n = 0;
  double dx = 0.0;
  double length = 0.0;  // nondimensional
  // Node and half-node coefficients.
  std::vector<double> a0, sa0, f, c1, c2, c3;
  std::vector<double> ha0, hsa0, hf, hc1, hc2, hc3;
  double kf = 0.0;    // friction: S = -kf q / sqrt(A)
  double gcos = 0.0;  // gravity: S = gcos A
  std::vector<double> A, q, An, qn;
  std::vector<double> F, S, Ah, qh, Fh, Sh;
  double w_left = 0.0;   // outgoing invariants at the ends, half a step ahead
  double w_right = 0.0;
};

struct StationPlan {
  std::size_t vessel = 0;
  int node = 0;
  double weight = 0.0;  // interpolation toward node + 1
  int vessel_id = 0;
  double x_cm = 0.0;
};

enum class TaskKind { kJunction, kInlet, kOutlet };

struct BoundaryTask {
  TaskKind kind;
  std::size_t index;  // junction index, or vessel index for inlet/outlet
};

double pressure_nd(double area, double a0, double f) { return f * (1.0 - std::sqrt(a0 / area)); }

}  // namespace

struct Simulation::Impl {
  Scales scales;
  GridConfig grid;
  Waveform inflow;
  double p0 = 0.0;  // g/cm/s^2
  double period = 0.0;
  int samples = 0;
  double dt = 0.0;  // nondimensional
  long long steps = 0;

  std::vector<VesselGrid> vessels;
  std::size_t root = 0;
  std::vector<std::pair<std::size_t, std::vector<std::size_t>>> junctions;  // parent, daughters (indices)
  std::vector<std::vector<CharacteristicEnd>> junction_ends;               // per-junction scratch
  std::vector<std::vector<double>> junction_area, junction_flow;
  std::vector<std::size_t> outlets;                                        // vessel indices
  std::vector<StreamingConvolver> convolvers;                              // parallel to outlets
  std::vector<BoundaryTask> tasks;
  std::vector<double> task_flow_residual, task_pressure_residual;
  std::vector<int> task_iterations;
  double max_flow_residual = 0.0;
  double max_pressure_residual = 0.0;
  int max_iterations = 0;

  std::vector<StationPlan> stations;
  std::unique_ptr<WorkerPool> pool;

  void build(const VesselNetwork& network, const std::map<int, ImpedanceSpectrum>& spectra,
             const std::vector<StationRequest>& requests);
  void interior(VesselGrid& v);
  void boundary(const BoundaryTask& task, std::size_t slot);
  void step();
  double stored_volume() const;
  void close_end(VesselGrid& v, bool distal, double area, double flow);
  // Boundary fluxes at the half step of the last step, for the volume audit.
  double inflow_half = 0.0;
  std::vector<double> outflow_half;  // parallel to outlets
  void sample(const StationPlan& s, double& area, double& flow, double& pressure_rel) const;
};

void Simulation::Impl::build(const VesselNetwork& network, const std::map<int, ImpedanceSpectrum>& spectra,
                             const std::vector<StationRequest>& requests) {
  grid.validate();
  if (network.size() == 0) throw ValidationError("simulation: empty network");
  scales.rho = network.fluid().rho;
  p0 = network.p0();
  period = inflow.period();
  samples = choose_samples_per_period(network, period, grid);
  if (samples % grid.output_samples != 0) {
    throw ValidationError(fmt::format("grid: output_samples {} must divide N = {}", grid.output_samples, samples));
  }
  const double tc = scales.time();
  const double pc = scales.pressure();
  const double lc = scales.length;
  dt = period / samples / tc;
  const FluidParams& fluid = network.fluid();
  const double nu = fluid.nu() * tc / (lc * lc);
  const double delta = std::sqrt(nu * (period / tc) / (2.0 * kPi));
  const double g = fluid.g * tc * tc / lc;

  vessels.resize(network.size());
  for (std::size_t idx = 0; idx < network.size(); ++idx) {
    const Vessel& v = network.vessels()[idx];
    VesselGrid& vg = vessels[idx];
    vg.id = v.id;
    vg.n = grid_points(v.length, grid);
    vg.length = v.length / lc;
    vg.dx = vg.length / (vg.n - 1);
    const StiffnessParams params = network.stiffness_for(v);
    auto coefficients = [&](double x_cm, double r0, double& a0, double& sa0, double& f, double& c1, double& c2,
                            double& c3) {
      const double dr = -v.taper.n1 * v.taper.n2 * std::exp(-v.taper.n2 * x_cm);  // dimensionless
      const double r = r0 / lc;
      a0 = kPi * r * r;
      sa0 = std::sqrt(a0);
      f = (4.0 / 3.0) * stiffness(r0, params) / pc;
      const double fp = (4.0 / 3.0) * stiffness_slope(r0, params) * lc / pc;
      c1 = 2.0 * (std::sqrt(kPi) * f + sa0 * fp) * dr;
      c2 = fp * dr;
      c3 = (2.0 * kPi * r * f + a0 * fp) * dr;
    };
    const int n = vg.n;
    for (auto* vec : {&vg.a0, &vg.sa0, &vg.f, &vg.c1, &vg.c2, &vg.c3}) vec->resize(n);
    for (auto* vec : {&vg.ha0, &vg.hsa0, &vg.hf, &vg.hc1, &vg.hc2, &vg.hc3}) vec->resize(n - 1);
    const double dx_cm = v.length / (n - 1);
    for (int i = 0; i < n; ++i) {
      const double x = (i == n - 1) ? v.length : dx_cm * i;
      coefficients(x, radius_at(v.taper, x), vg.a0[i], vg.sa0[i], vg.f[i], vg.c1[i], vg.c2[i], vg.c3[i]);
    }
    // Midpoint radii come from the mean of the neighbouring areas, which is
    // what the half step produces from a state at rest. A tapered vessel at
    // rest then stays at rest to rounding.
    for (int i = 0; i + 1 < n; ++i) {
      const double r_half = lc * std::sqrt(0.5 * (vg.a0[i] + vg.a0[i + 1]) / kPi);
      coefficients(dx_cm * (i + 0.5), r_half, vg.ha0[i], vg.hsa0[i], vg.hf[i], vg.hc1[i], vg.hc2[i], vg.hc3[i]);
    }
    vg.kf = 2.0 * std::sqrt(kPi) * nu / delta;
    const double cosine = gravity_cosine(v.gravity_angle);
    vg.gcos = (g == 0.0 || cosine == 0.0) ? 0.0 : g * cosine;
    vg.A = vg.a0;
    vg.q.assign(n, 0.0);
    vg.An = vg.A;
    vg.qn = vg.q;
    for (auto* vec : {&vg.F, &vg.S}) vec->assign(n, 0.0);
    for (auto* vec : {&vg.Ah, &vg.qh, &vg.Fh, &vg.Sh}) vec->assign(n - 1, 0.0);
  }
  root = network.index_of(network.root_id());
  for (const auto& j : network.junctions()) {
    std::vector<std::size_t> d;
    for (int id : j.daughters) d.push_back(network.index_of(id));
    junction_ends.emplace_back(d.size() + 1);
    junction_area.emplace_back(d.size() + 1);
    junction_flow.emplace_back(d.size() + 1);
    junctions.emplace_back(network.index_of(j.parent), std::move(d));
  }
  for (int id : network.terminal_ids()) {
    auto it = spectra.find(id);
    if (it == spectra.end()) throw ValidationError(fmt::format("no outlet impedance for terminal vessel {}", id));
    const ImpedanceSpectrum& spec = it->second;
    if (spec.samples() != samples || std::abs(spec.period - period) > 1e-12 * period) {
      throw ValidationError(fmt::format(
          "outlet spectrum for vessel {} has period {} s and {} samples; the run needs {} s and {}", id, spec.period,
          spec.samples(), period, samples));
    }
    const double dt_cgs = period / samples;
    std::vector<double> kernel(spec.impulse.size());
    for (std::size_t j = 0; j < kernel.size(); ++j) kernel[j] = dt_cgs * spec.impulse[j] / scales.impedance();
    outlets.push_back(network.index_of(id));
    convolvers.emplace_back(std::move(kernel), grid.convolution_block);
  }
  for (std::size_t j = 0; j < junctions.size(); ++j) tasks.push_back({TaskKind::kJunction, j});
  tasks.push_back({TaskKind::kInlet, root});
  for (std::size_t o = 0; o < outlets.size(); ++o) tasks.push_back({TaskKind::kOutlet, o});
  outflow_half.assign(outlets.size(), 0.0);
  task_flow_residual.assign(tasks.size(), 0.0);
  task_pressure_residual.assign(tasks.size(), 0.0);
  task_iterations.assign(tasks.size(), 0);

  const auto& req = requests.empty() ? default_stations(network) : requests;
  for (const auto& r : req) {
    if (!network.contains(r.vessel_id)) throw ValidationError(fmt::format("station on unknown vessel {}", r.vessel_id));
    const Vessel& v = network.vessel(r.vessel_id);
    if (r.x < 0.0 || r.x > v.length) {
      throw ValidationError(fmt::format("station x = {} outside vessel {} (length {})", r.x, v.id, v.length));
    }
    StationPlan s;
    s.vessel = network.index_of(r.vessel_id);
    s.vessel_id = r.vessel_id;
    s.x_cm = r.x;
    const int n = vessels[s.vessel].n;
    const double pos = r.x / v.length * (n - 1);
    s.node = std::min(static_cast<int>(std::floor(pos)), n - 1);
    s.weight = pos - s.node;
    if (s.weight < 1e-9) s.weight = 0.0;
    if (s.node == n - 1) s.weight = 0.0;
    if (1.0 - s.weight < 1e-9) {
      ++s.node;
      s.weight = 0.0;
    }
    stations.push_back(s);
  }
  pool = std::make_unique<WorkerPool>(grid.workers);
}

// Richtmyer two-step Lax-Wendroff on the interior, plus the outgoing
// invariants at both ends traced back along the characteristics.
void Simulation::Impl::interior(VesselGrid& v) {
  const int n = v.n;
  const double* A = v.A.data();
  const double* q = v.q.data();
  double* F = v.F.data();
  double* S = v.S.data();
  double u_max = 0.0;
  double c2_max = 0.0;
  for (int i = 0; i < n; ++i) {
    const double sq = std::sqrt(A[i]);
    const double isq = 1.0 / sq;
    const double u = q[i] * (isq * isq);
    F[i] = q[i] * u + v.f[i] * (v.sa0[i] * sq - v.a0[i]);
    S[i] = -v.kf * q[i] * isq + v.gcos * A[i] + v.c1[i] * sq - v.c2[i] * A[i] - v.c3[i];
    u_max = std::max(u_max, std::abs(u));
    c2_max = std::max(c2_max, v.f[i] * v.sa0[i] * isq);
  }
  c2_max *= 0.5;
  if ((u_max + std::sqrt(c2_max)) * dt > v.dx) {
    throw NumericalError(fmt::format("CFL violation in vessel {} at t = {:.6f} s (|u|+c = {:.4g} cm/s, dx/dt = {:.4g} cm/s)",
                                     v.id, steps * dt * scales.time(), (u_max + std::sqrt(c2_max)) * scales.velocity(),
                                     v.dx / dt * scales.velocity()));
  }
  const double half = 0.5 * dt / v.dx;
  const double quarter_dt = 0.25 * dt;
  for (int i = 0; i + 1 < n; ++i) {
    const double ah = 0.5 * (A[i] + A[i + 1]) - half * (q[i + 1] - q[i]);
    const double qh = 0.5 * (q[i] + q[i + 1]) - half * (F[i + 1] - F[i]) + quarter_dt * (S[i] + S[i + 1]);
    if (!(ah > 0.0)) {
      throw NumericalError(fmt::format("non-positive area in vessel {} at x = {:.4f} cm, t = {:.6f} s", v.id,
                                       (i + 0.5) * v.dx * scales.length, steps * dt * scales.time()));
    }
    const double sq = std::sqrt(ah);
    const double isq = 1.0 / sq;
    v.Ah[i] = ah;
    v.qh[i] = qh;
    v.Fh[i] = qh * qh * (isq * isq) + v.hf[i] * (v.hsa0[i] * sq - v.ha0[i]);
    v.Sh[i] = -v.kf * qh * isq + v.gcos * ah + v.hc1[i] * sq - v.hc2[i] * ah - v.hc3[i];
  }
  const double full = dt / v.dx;
  const double half_dt = 0.5 * dt;
  for (int i = 1; i + 1 < n; ++i) {
    const double an = A[i] - full * (v.qh[i] - v.qh[i - 1]);
    if (!(an > 0.0)) {
      throw NumericalError(fmt::format("non-positive area in vessel {} at x = {:.4f} cm, t = {:.6f} s", v.id,
                                       i * v.dx * scales.length, (steps + 1) * dt * scales.time()));
    }
    v.An[i] = an;
    v.qn[i] = q[i] - full * (v.Fh[i] - v.Fh[i - 1]) + half_dt * (v.Sh[i] + v.Sh[i - 1]);
  }

  // Outgoing invariants at the half step.
  auto node_state = [&](int i, double& u, double& phi, double& c) {
    u = q[i] / A[i];
    phi = characteristic_phi(A[i], v.a0[i], v.f[i], 1.0);
    c = std::sqrt(0.5 * v.f[i] * std::sqrt(v.a0[i] / A[i]));
  };
  auto trace = [&](int end, int inner, int sign) {
    double u_e, phi_e, c_e, u_i, phi_i, c_i;
    node_state(end, u_e, phi_e, c_e);
    node_state(inner, u_i, phi_i, c_i);
    const double lambda = u_e + sign * c_e;  // points out of the vessel
    const double s = sign * lambda * half_dt / v.dx;
    if (!(s >= 0.0 && s <= 1.0)) {
      throw NumericalError(fmt::format("characteristic foot outside the boundary cell in vessel {} (fraction {})", v.id, s));
    }
    const double w_end = u_e + sign * phi_e;
    const double w_in = u_i + sign * phi_i;
    const double af = (1.0 - s) * A[end] + s * A[inner];
    const double qf = (1.0 - s) * q[end] + s * q[inner];
    // Changes of Phi and p with position at fixed area (taper, stiffness gradient).
    const double outward = sign * v.dx;  // x(end) - x(inner)
    auto taper = [&](double a, double speed) {
      const double dphi = (characteristic_phi(a, v.a0[end], v.f[end], 1.0) -
                           characteristic_phi(a, v.a0[inner], v.f[inner], 1.0)) / outward;
      const double dp = (pressure_nd(a, v.a0[end], v.f[end]) - pressure_nd(a, v.a0[inner], v.f[inner])) / outward;
      return sign * speed * dphi - dp;
    };
    // The same differences taken at the state at rest are a pure truncation
    // error; removing them keeps a tapered vessel at rest.
    const double a_rest = (1.0 - s) * v.a0[end] + s * v.a0[inner];
    const double rest_bias = taper(a_rest, sign * std::sqrt(0.5 * v.f[end]));
    const double src = v.gcos - v.kf * qf / (af * std::sqrt(af)) + taper(af, lambda) - rest_bias;
    return (1.0 - s) * w_end + s * w_in + half_dt * src;
  };
  v.w_right = trace(n - 1, n - 2, +1);
  v.w_left = trace(0, 1, -1);
}

// End nodes take a conservative half-cell step between the neighbouring
// half-node flux and the boundary state solved at the half step, so the
// boundary fluxes account for all volume entering or leaving a vessel.
void Simulation::Impl::close_end(VesselGrid& v, bool distal, double area, double flow) {
  const int e = distal ? v.n - 1 : 0;
  const int h = distal ? v.n - 2 : 0;
  const double sq = std::sqrt(area);
  const double fb = flow * flow / area + v.f[e] * (v.sa0[e] * sq - v.a0[e]);
  const double sb = -v.kf * flow / sq + v.gcos * area + v.c1[e] * sq - v.c2[e] * area - v.c3[e];
  const double r = 2.0 * dt / v.dx;
  const double sign = distal ? 1.0 : -1.0;  // outward flux minus inward flux
  const double an = v.A[e] - r * sign * (flow - v.qh[h]);
  if (!(an > 0.0)) {
    throw NumericalError(fmt::format("non-positive area at the {} end of vessel {}, t = {:.6f} s",
                                     distal ? "distal" : "proximal", v.id, (steps + 1) * dt * scales.time()));
  }
  v.An[e] = an;
  v.qn[e] = v.q[e] - r * sign * (fb - v.Fh[h]) + 0.5 * dt * (sb + v.Sh[h]);
}

void Simulation::Impl::boundary(const BoundaryTask& task, std::size_t slot) {
  switch (task.kind) {
    case TaskKind::kJunction: {
      const auto& [parent, daughters] = junctions[task.index];
      auto& ends = junction_ends[task.index];
      auto& area = junction_area[task.index];
      auto& flow = junction_flow[task.index];
      const VesselGrid& p = vessels[parent];
      ends[0] = {p.a0.back(), p.f.back(), p.w_right, +1, p.A.back()};
      for (std::size_t k = 0; k < daughters.size(); ++k) {
        const VesselGrid& dv = vessels[daughters[k]];
        ends[k + 1] = {dv.a0.front(), dv.f.front(), dv.w_left, -1, dv.A.front()};
      }
      JunctionStats stats;
      try {
        stats = junction_solve_into(ends, 1.0, area, flow);
      } catch (const NumericalError& e) {
        throw NumericalError(fmt::format("junction at distal end of vessel {} (t = {:.6f} s): {}", p.id,
                                         (steps + 0.5) * dt * scales.time(), e.what()));
      }
      close_end(vessels[parent], true, area[0], flow[0]);
      for (std::size_t k = 0; k < daughters.size(); ++k) close_end(vessels[daughters[k]], false, area[k + 1], flow[k + 1]);
      task_flow_residual[slot] = stats.flow_residual;
      task_pressure_residual[slot] = stats.pressure_residual;
      task_iterations[slot] = stats.iterations;
      break;
    }
    case TaskKind::kInlet: {
      // q is imposed at the node; the area follows from the half-cell volume balance.
      VesselGrid& v = vessels[task.index];
      const double q_half = inflow((steps + 0.5) * dt * scales.time()) / scales.flow;
      const double an = v.A.front() - 2.0 * dt / v.dx * (v.qh.front() - q_half);
      if (!(an > 0.0)) {
        throw NumericalError(fmt::format("non-positive area at the inlet of vessel {}, t = {:.6f} s", v.id,
                                         (steps + 1) * dt * scales.time()));
      }
      v.An.front() = an;
      v.qn.front() = inflow((steps + 1) * dt * scales.time()) / scales.flow;
      inflow_half = q_half;
      break;
    }
    case TaskKind::kOutlet: {
      // The convolution runs on the half-step outflow sequence.
      VesselGrid& v = vessels[outlets[task.index]];
      StreamingConvolver& conv = convolvers[task.index];
      const CharacteristicEnd end{v.a0.back(), v.f.back(), v.w_right, +1, v.A.back()};
      const double area = outlet_area(end, conv.instantaneous(), conv.history(), 1.0);
      const double flow = area * (v.w_right - characteristic_phi(area, end.a0, end.f, 1.0));
      close_end(v, true, area, flow);
      conv.push(flow);
      outflow_half[task.index] = flow;
      break;
    }
  }
}

void Simulation::Impl::step() {
  pool->run(vessels.size(), [this](std::size_t i) { interior(vessels[i]); });
  pool->run(tasks.size(), [this](std::size_t i) { boundary(tasks[i], i); });
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    max_flow_residual = std::max(max_flow_residual, task_flow_residual[i]);
    max_pressure_residual = std::max(max_pressure_residual, task_pressure_residual[i]);
    max_iterations = std::max(max_iterations, task_iterations[i]);
  }
  for (auto& v : vessels) {
    v.A.swap(v.An);
    v.q.swap(v.qn);
  }
  ++steps;
}

double Simulation::Impl::stored_volume() const {
  double vol = 0.0;
  for (const auto& v : vessels) {
    double s = 0.5 * (v.A.front() + v.A.back());
    for (int i = 1; i + 1 < v.n; ++i) s += v.A[i];
    vol += s * v.dx;
  }
  return vol;
}

void Simulation::Impl::sample(const StationPlan& s, double& area, double& flow, double& pressure_rel) const {
  const VesselGrid& v = vessels[s.vessel];
  const int i = s.node;
  if (s.weight == 0.0) {
    area = v.A[i];
    flow = v.q[i];
    pressure_rel = pressure_nd(area, v.a0[i], v.f[i]);
    return;
  }
  const double w = s.weight;
  area = (1.0 - w) * v.A[i] + w * v.A[i + 1];
  flow = (1.0 - w) * v.q[i] + w * v.q[i + 1];
  pressure_rel = (1.0 - w) * pressure_nd(v.A[i], v.a0[i], v.f[i]) + w * pressure_nd(v.A[i + 1], v.a0[i + 1], v.f[i + 1]);
}

Simulation::Simulation(const VesselNetwork& network, const Waveform& inflow, const GridConfig& grid,
                       const std::map<int, ImpedanceSpectrum>& outlets, std::vector<StationRequest> stations)
    : impl_(std::make_unique<Impl>()) {
  if (inflow.kind() != WaveformKind::kFlow) throw ValidationError("simulation: inflow waveform must be a flow");
  impl_->grid = grid;
  impl_->inflow = inflow;
  impl_->build(network, outlets, stations);
}

Simulation::~Simulation() = default;
Simulation::Simulation(Simulation&&) noexcept = default;
Simulation& Simulation::operator=(Simulation&&) noexcept = default;

void Simulation::step() { impl_->step(); }
double Simulation::time() const { return impl_->steps * impl_->dt * impl_->scales.time(); }
long long Simulation::step_count() const { return impl_->steps; }
double Simulation::dt() const { return impl_->dt * impl_->scales.time(); }
int Simulation::samples_per_period() const { return impl_->samples; }
const Scales& Simulation::scales() const { return impl_->scales; }
double Simulation::max_flow_residual() const { return impl_->max_flow_residual; }
double Simulation::max_pressure_residual() const { return impl_->max_pressure_residual; }

VesselSnapshot Simulation::snapshot(int vessel_id) const {
  for (const auto& v : impl_->vessels) {
    if (v.id != vessel_id) continue;
    const Scales& sc = impl_->scales;
    VesselSnapshot s;
    for (int i = 0; i < v.n; ++i) {
      s.x.push_back((i == v.n - 1 ? v.length : v.dx * i) * sc.length);
      s.area.push_back(v.A[i] * sc.area());
      s.flow.push_back(v.q[i] * sc.flow);
      s.pressure.push_back(impl_->p0 + pressure_nd(v.A[i], v.a0[i], v.f[i]) * sc.pressure());
    }
    return s;
  }
  throw ValidationError(fmt::format("snapshot: unknown vessel {}", vessel_id));
}

void Simulation::set_state(int vessel_id, std::span<const double> area, std::span<const double> flow) {
  for (auto& v : impl_->vessels) {
    if (v.id != vessel_id) continue;
    if (area.size() != static_cast<std::size_t>(v.n) || flow.size() != static_cast<std::size_t>(v.n)) {
      throw ValidationError(fmt::format("set_state: vessel {} has {} grid points", vessel_id, v.n));
    }
    for (int i = 0; i < v.n; ++i) {
      if (!(area[i] > 0.0)) throw ValidationError("set_state: areas must be positive");
      v.A[i] = area[i] / impl_->scales.area();
      v.q[i] = flow[i] / impl_->scales.flow;
    }
    return;
  }
  throw ValidationError(fmt::format("set_state: unknown vessel {}", vessel_id));
}

SimulationResult Simulation::run() {
  Impl& s = *impl_;
  const int n = s.samples;
  const int m = s.grid.output_samples;
  const int stride = n / m;
  const std::size_t ns = s.stations.size();
  const Scales& sc = s.scales;
  // Records in nondimensional units: [station][sample].
  std::vector<std::vector<double>> rec_a(ns, std::vector<double>(m)), rec_q = rec_a, rec_p = rec_a;
  std::vector<std::vector<double>> prev_q, prev_p;

  SimulationResult result;
  result.period = s.period;
  result.dt = s.period / n;
  result.samples_per_period = n;
  for (const auto& v : s.vessels) result.total_grid_points += v.n;

  double in_vol = 0.0, out_vol = 0.0, stored_start = 0.0, stored_end = 0.0;
  for (int cycle = 1; cycle <= s.grid.max_cycles; ++cycle) {
    in_vol = out_vol = 0.0;
    stored_start = s.stored_volume();
    for (int k = 0; k < n; ++k) {
      if (k % stride == 0) {
        const int slot = k / stride;
        for (std::size_t st = 0; st < ns; ++st) s.sample(s.stations[st], rec_a[st][slot], rec_q[st][slot], rec_p[st][slot]);
      }
      s.step();
      in_vol += s.dt * s.inflow_half;
      for (double q : s.outflow_half) out_vol += s.dt * q;
    }
    stored_end = s.stored_volume();
    result.cycles = cycle;
    if (!prev_q.empty()) {
      double change = 0.0;
      auto rel = [](const std::vector<double>& now, const std::vector<double>& before) {
        double diff = 0.0, norm = 0.0;
        for (std::size_t i = 0; i < now.size(); ++i) {
          diff += (now[i] - before[i]) * (now[i] - before[i]);
          norm += now[i] * now[i];
        }
        if (diff == 0.0) return 0.0;
        return std::sqrt(diff / std::max(norm, 1e-28));
      };
      for (std::size_t st = 0; st < ns; ++st) {
        change = std::max({change, rel(rec_p[st], prev_p[st]), rel(rec_q[st], prev_q[st])});
      }
      result.cycle_changes.push_back(change);
      if (change < s.grid.periodicity_tolerance && cycle >= s.grid.min_cycles) {
        result.converged = true;
        break;
      }
    } else if (s.grid.max_cycles == 1) {
      break;
    }
    prev_q = rec_q;
    prev_p = rec_p;
  }
  result.steps = s.steps;
  result.max_flow_residual = s.max_flow_residual;
  result.max_pressure_residual = s.max_pressure_residual;
  result.max_newton_iterations = s.max_iterations;
  const double vol = sc.length * sc.length * sc.length;
  result.mass.inflow_volume = in_vol * vol;
  result.mass.outflow_volume = out_vol * vol;
  result.mass.stored_change = (stored_end - stored_start) * vol;
  const double imbalance = result.mass.inflow_volume - result.mass.outflow_volume - result.mass.stored_change;
  result.mass.relative_error = result.mass.inflow_volume != 0.0 ? std::abs(imbalance / result.mass.inflow_volume)
                                                                : std::abs(imbalance);
  result.time.resize(m);
  for (int k = 0; k < m; ++k) result.time[k] = k * stride * result.dt;
  for (std::size_t st = 0; st < ns; ++st) {
    StationSeries series;
    series.vessel_id = s.stations[st].vessel_id;
    series.x = s.stations[st].x_cm;
    series.area.resize(m);
    series.flow.resize(m);
    series.pressure.resize(m);
    for (int k = 0; k < m; ++k) {
      series.area[k] = rec_a[st][k] * sc.area();
      series.flow[k] = rec_q[st][k] * sc.flow;
      series.pressure[k] = s.p0 + rec_p[st][k] * sc.pressure();
    }
    result.stations.push_back(std::move(series));
  }
  return result;
}

SimulationResult run_simulation(const VesselNetwork& network, const Waveform& inflow, const GridConfig& grid,
                                Posture posture, const std::map<int, ImpedanceSpectrum>& outlets,
                                std::vector<StationRequest> stations) {
  const VesselNetwork placed = assign_gravity_angles(network, posture);
  Simulation sim(placed, inflow, grid, outlets, std::move(stations));
  return sim.run();
}

}  // namespace hemo1d

// Boundary closures: branch points, prescribed inflow and impedance outlets.
// Every closure pairs the outgoing invariant of each vessel with the physical
// coupling condition and solves for the boundary areas.
#include <algorithm>
#include <array>
#include <cmath>

#include <fmt/format.h>

#include "hemo1d/solver.hpp"
#include "hemo1d/units.hpp"

namespace hemo1d {

namespace {

constexpr int kMaxIterations = 50;
constexpr double kJunctionTolerance = 1e-10;
constexpr std::size_t kMaxEnds = 16;

struct EndEval {
  double q;
  double dq;
  double p;
  double dp;
};

// speed = sqrt(f / 2 rho), so Phi = 4 speed (1 - (A0/A)^(1/4)) and c = speed (A0/A)^(1/4).
EndEval evaluate(const CharacteristicEnd& e, double speed, double area) {
  const double ratio = std::sqrt(e.a0 / area);
  const double quarter = std::sqrt(ratio);
  const double u = e.w - e.direction * 4.0 * speed * (1.0 - quarter);
  const double c = speed * quarter;
  return {area * u, u - e.direction * c, e.f * (1.0 - ratio), 0.5 * e.f * ratio / area};
}

double initial_area(const CharacteristicEnd& e) { return e.area_guess > 0.0 ? e.area_guess : e.a0; }

}  // namespace

double characteristic_phi(double area, double a0, double f, double rho) {
  return 4.0 * std::sqrt(0.5 * f / rho) * (1.0 - std::sqrt(std::sqrt(a0 / area)));
}

JunctionStats junction_solve_into(std::span<const CharacteristicEnd> ends, double rho, std::span<double> area_out,
                                  std::span<double> flow_out) {
  const std::size_t n = ends.size();
  if (n < 2) throw ValidationError("junction_solve: need a parent and at least one daughter");
  if (n > kMaxEnds) throw ValidationError(fmt::format("junction_solve: at most {} vessels per junction", kMaxEnds));
  if (area_out.size() != n || flow_out.size() != n) throw ValidationError("junction_solve: output size mismatch");
  std::array<double, kMaxEnds> speed, area, trial, delta, r, trial_r;
  std::array<EndEval, kMaxEnds> ev, trial_ev;
  for (std::size_t i = 0; i < n; ++i) {
    speed[i] = std::sqrt(0.5 * ends[i].f / rho);
    area[i] = initial_area(ends[i]);
  }
  auto residuals = [&](const std::array<double, kMaxEnds>& a, std::array<EndEval, kMaxEnds>& out,
                       std::array<double, kMaxEnds>& res) {
    for (std::size_t i = 0; i < n; ++i) out[i] = evaluate(ends[i], speed[i], a[i]);
    res[0] = out[0].q;
    for (std::size_t i = 1; i < n; ++i) {
      res[0] -= out[i].q;
      res[i] = out[0].p - out[i].p;
    }
    double norm = 0.0;
    for (std::size_t i = 0; i < n; ++i) norm = std::max(norm, std::abs(res[i]));
    return norm;
  };
  double norm = residuals(area, ev, r);
  int it = 0;
  for (; it < kMaxIterations && norm > 1e-3 * kJunctionTolerance; ++it) {
    // Eliminate daughter updates through the pressure rows, then solve the flow row.
    double lhs = ev[0].dq;
    double rhs = -r[0];
    for (std::size_t i = 1; i < n; ++i) {
      lhs -= ev[0].dp * ev[i].dq / ev[i].dp;
      rhs += ev[i].dq * r[i] / ev[i].dp;
    }
    delta[0] = rhs / lhs;
    for (std::size_t i = 1; i < n; ++i) delta[i] = (r[i] + ev[0].dp * delta[0]) / ev[i].dp;
    double step = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
      while (area[i] + step * delta[i] <= 0.1 * area[i]) step *= 0.5;
    }
    double trial_norm = norm;
    for (int halving = 0; halving < 30; ++halving) {
      for (std::size_t i = 0; i < n; ++i) trial[i] = area[i] + step * delta[i];
      trial_norm = residuals(trial, trial_ev, trial_r);
      if (trial_norm < norm) break;
      step *= 0.5;
    }
    if (!(trial_norm < norm)) break;  // stalled at rounding level
    area = trial;
    ev = trial_ev;
    r = trial_r;
    norm = trial_norm;
  }
  if (!(norm < kJunctionTolerance)) {
    throw NumericalError(fmt::format("junction_solve: no convergence after {} iterations (residual {:.3e})", it, norm));
  }
  JunctionStats stats;
  stats.iterations = it;
  stats.flow_residual = std::abs(r[0]);
  for (std::size_t i = 0; i < n; ++i) {
    area_out[i] = area[i];
    flow_out[i] = ev[i].q;
    if (i > 0) stats.pressure_residual = std::max(stats.pressure_residual, std::abs(r[i]));
  }
  return stats;
}

JunctionSolution junction_solve(std::span<const CharacteristicEnd> ends, double rho) {
  JunctionSolution out;
  out.area.resize(ends.size());
  out.flow.resize(ends.size());
  const JunctionStats stats = junction_solve_into(ends, rho, out.area, out.flow);
  out.iterations = stats.iterations;
  out.flow_residual = stats.flow_residual;
  out.pressure_residual = stats.pressure_residual;
  return out;
}

namespace {

template <class Residual>
double scalar_newton(double area, Residual&& residual, const char* what) {
  double value = 0.0;
  double slope = 0.0;
  residual(area, value, slope);
  for (int it = 0; it < kMaxIterations; ++it) {
    if (!(slope > 0.0) || !std::isfinite(slope)) {
      throw NumericalError(fmt::format("{}: non-monotone characteristic relation (slope {})", what, slope));
    }
    double next = area - value / slope;
    if (next <= 0.1 * area) next = 0.1 * area;
    if (std::abs(next - area) <= 1e-13 * area) return next;
    area = next;
    residual(area, value, slope);
  }
  throw NumericalError(fmt::format("{}: Newton did not converge (residual {:.3e})", what, value));
}

}  // namespace

double inlet_area(const CharacteristicEnd& end, double flow, double rho) {
  if (end.direction != -1) throw ValidationError("inlet_area: expects a proximal end");
  const double speed = std::sqrt(0.5 * end.f / rho);
  return scalar_newton(initial_area(end), [&](double a, double& value, double& slope) {
    const EndEval e = evaluate(end, speed, a);
    value = e.q - flow;
    slope = e.dq;
  }, "inlet");
}

double outlet_area(const CharacteristicEnd& end, double k0, double history, double rho) {
  if (end.direction != 1) throw ValidationError("outlet_area: expects a distal end");
  const double speed = std::sqrt(0.5 * end.f / rho);
  return scalar_newton(initial_area(end), [&](double a, double& value, double& slope) {
    const EndEval e = evaluate(end, speed, a);
    value = e.p - k0 * e.q - history;
    slope = e.dp - k0 * e.dq;
  }, "outlet");
}

}  // namespace hemo1d

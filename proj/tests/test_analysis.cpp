#include <doctest.h>

#include <cmath>
#include <vector>

#include "hemo1d/analysis.hpp"
#include "hemo1d/units.hpp"
#include "support.hpp"

using namespace hemo1d;
using namespace hemo1d::testing;

namespace {

constexpr double kRho = 1.057;
constexpr double kC = 500.0;

double bump(double t, double centre, double width) { return std::exp(-0.5 * std::pow((t - centre) / width, 2)); }

// One period of p and q built from known forward and backward pressure waves.
struct Synthetic {
  std::vector<double> p, q, a, forward, backward;
  double dt = 0.0;
};

Synthetic superpose(double forward_amp, double backward_amp, int n = 1000, double period = 0.8) {
  Synthetic s;
  s.dt = period / n;
  for (int i = 0; i < n; ++i) {
    const double t = i * s.dt;
    const double f = forward_amp * bump(t, 0.15, 0.03);
    const double b = backward_amp * bump(t, 0.3, 0.04);
    s.forward.push_back(f);
    s.backward.push_back(b);
    s.p.push_back(1.0e5 + f + b);
    s.a.push_back(2.0 + 0.1 * std::sin(2 * kPi * t / period));
    s.q.push_back(s.a.back() * (10.0 + (f - b) / (kRho * kC)));
  }
  return s;
}

}  // namespace

TEST_CASE("decomposition identities") {
  const Synthetic s = superpose(8000.0, 3000.0);
  const WiaResult w = wia_decompose(s.p, s.q, s.a, kRho, kC, s.dt);
  REQUIRE(w.size() == s.p.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double scale_p = std::abs(w.dp_dt[i]) + 1e-300;
    const double scale_u = std::abs(w.du_dt[i]) + 1e-300;
    CHECK(std::abs(w.dp_plus_dt[i] + w.dp_minus_dt[i] - w.dp_dt[i]) <= 1e-12 * scale_p);
    CHECK(std::abs(w.du_plus_dt[i] + w.du_minus_dt[i] - w.du_dt[i]) <= 1e-12 * scale_u);
    CHECK(w.wi_plus[i] >= 0.0);
    CHECK(w.wi_minus[i] <= 0.0);
    CHECK(w.p_plus[i] + w.p_minus[i] == doctest::Approx(s.p[i] - s.p[0]).epsilon(1e-12));
  }
}

TEST_CASE("known forward and backward waves are recovered") {
  const Synthetic s = superpose(8000.0, 3000.0);
  const WiaResult w = wia_decompose(s.p, s.q, s.a, kRho, kC, s.dt);
  const std::size_t n = s.p.size();
  double peak = 0.0;
  for (double x : w.dp_dt) peak = std::max(peak, std::abs(x));
  for (std::size_t i = 0; i < n; ++i) {
    const double fwd = (s.forward[(i + 1) % n] - s.forward[(i + n - 1) % n]) / (2 * s.dt);
    const double bwd = (s.backward[(i + 1) % n] - s.backward[(i + n - 1) % n]) / (2 * s.dt);
    CHECK(std::abs(w.dp_plus_dt[i] - fwd) <= 1e-8 * peak);
    CHECK(std::abs(w.dp_minus_dt[i] - bwd) <= 1e-8 * peak);
    CHECK(w.p_plus[i] == doctest::Approx(s.forward[i] - s.forward[0]).epsilon(1e-8).scale(8000.0));
    CHECK(w.p_minus[i] == doctest::Approx(s.backward[i] - s.backward[0]).epsilon(1e-8).scale(3000.0));
  }
}

TEST_CASE("forward-only wave") {
  const Synthetic s = superpose(8000.0, 0.0);
  const WiaResult w = wia_decompose(s.p, s.q, s.a, kRho, kC, s.dt);
  double peak = 0.0, backward = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    peak = std::max(peak, std::abs(w.dp_dt[i]));
    backward = std::max(backward, std::abs(w.dp_minus_dt[i]));
  }
  CHECK(backward < 1e-10 * peak);
  CHECK(reflection_coefficient(w) < 1e-10);
  bool forward_compression = false;
  for (const WaveSegment& seg : w.segments) {
    CHECK((seg.kind == WaveClass::kForwardCompression || seg.kind == WaveClass::kForwardExpansion));
    forward_compression |= seg.kind == WaveClass::kForwardCompression;
  }
  CHECK(forward_compression);
  CHECK(to_string(WaveClass::kForwardCompression) == "FCW");
}

TEST_CASE("equal forward and backward waves give unit reflection") {
  // The backward wave arrives inside the compression window with the same shape.
  std::vector<double> p, q, a;
  const int n = 800;
  const double dt = 1e-3;
  for (int i = 0; i < n; ++i) {
    const double f = 5000.0 * bump(i * dt, 0.2, 0.03);
    const double b = 5000.0 * bump(i * dt, 0.26, 0.03);
    p.push_back(f + b);
    a.push_back(1.0);
    q.push_back((f - b) / (kRho * kC));
  }
  const WiaResult w = wia_decompose(p, q, a, kRho, kC, dt);
  const CompressionWindow win = compression_window(w);
  CHECK((win.begin > 700 || win.begin < 150));  // the foot of the upstroke, possibly wrapped
  CHECK(win.end > 260);
  CHECK(reflection_coefficient(w) == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("constant signals carry no waves") {
  const std::vector<double> p(100, 9e4), q(100, 30.0), a(100, 3.0);
  const WiaResult w = wia_decompose(p, q, a, kRho, kC, 0.01);
  for (std::size_t i = 0; i < w.size(); ++i) {
    CHECK(w.wi_plus[i] == 0.0);
    CHECK(w.wi_minus[i] == 0.0);
  }
  CHECK(w.segments.empty());
  CHECK_THROWS_AS(reflection_coefficient(w), NumericalError);
}

TEST_CASE("decomposition input errors") {
  const std::vector<double> p(10, 1.0), q(9, 1.0), a(10, 1.0);
  CHECK_THROWS_AS(wia_decompose(p, q, a, kRho, kC, 0.01), ValidationError);
  CHECK_THROWS_AS(wia_decompose(p, p, a, kRho, 0.0, 0.01), ValidationError);
  const std::vector<double> two(2, 1.0);
  CHECK_THROWS_AS(wia_decompose(two, two, two, kRho, kC, 0.01), ValidationError);
}

TEST_CASE("wall shear stress") {
  const double delta = boundary_layer_thickness(0.032 / 1.057, 0.658);
  CHECK(delta == doctest::Approx(0.0563).epsilon(1e-3));
  const std::vector<double> area{1.5, 1.5, 2.0};
  const std::vector<double> flow{0.0, 90.0, 120.0};
  const auto tau = wall_shear_stress(flow, area, 0.032, delta);
  CHECK(tau[0] == 0.0);
  CHECK(tau[1] == doctest::Approx(34.1).epsilon(2e-3));
  CHECK(tau[2] == doctest::Approx(tau[1]).epsilon(1e-14));

  std::vector<double> doubled{0.0, 180.0, 240.0};
  const auto tau2 = wall_shear_stress(doubled, area, 0.032, delta);
  for (std::size_t i = 0; i < tau.size(); ++i) CHECK(tau2[i] == doctest::Approx(2 * tau[i]));

  std::vector<double> q3, a3;
  for (std::size_t i = 0; i < flow.size(); ++i) {
    q3.push_back(3.7 * flow[i]);
    a3.push_back(3.7 * area[i]);
  }
  const auto tau3 = wall_shear_stress(q3, a3, 0.032, delta);
  for (std::size_t i = 0; i < tau.size(); ++i) CHECK(tau3[i] == doctest::Approx(tau[i]).epsilon(1e-14));
  CHECK_THROWS_AS(wall_shear_stress(flow, area, 0.032, 0.0), ValidationError);
}

TEST_CASE("pressure statistics") {
  const std::vector<double> flat(50, 80.0);
  const PressureStats f = pressure_stats(flat);
  CHECK(f.systolic == 80.0);
  CHECK(f.diastolic == 80.0);
  CHECK(f.pulse == 0.0);
  std::vector<double> sine;
  for (int i = 0; i < 400; ++i) sine.push_back(90.0 + 20.0 * std::sin(2 * kPi * i / 400));
  const PressureStats s = pressure_stats(sine);
  CHECK(s.systolic == doctest::Approx(110.0));
  CHECK(s.diastolic == doctest::Approx(70.0));
  CHECK(s.pulse == doctest::Approx(40.0));
  CHECK_THROWS_AS(pressure_stats(std::vector<double>{}), ValidationError);
}

TEST_CASE("exercise transform") {
  const Waveform rest = load_waveform_csv(HEMO1D_DATA_DIR "/dorv_rest_inflow.csv");
  const Waveform ex = exercise_transform(rest);
  CHECK(ex.period() == doctest::Approx(0.6 * 0.658).epsilon(1e-12));
  CHECK(60.0 / ex.period() == doctest::Approx(152.0).epsilon(1e-3));
  CHECK(ex.mean() == doctest::Approx(2.0 * rest.mean()).epsilon(1e-12));
  CHECK(ex.size() == rest.size());
  const Waveform same = exercise_transform(rest, 1.0, 1.0);
  double worst = 0.0;
  for (std::size_t i = 0; i < rest.size(); ++i) worst = std::max(worst, std::abs(same.values()[i] - rest.values()[i]));
  CHECK(worst < 1e-8 * rest.peak());  // the file's time stamps carry nine decimals
  CHECK_THROWS_AS(exercise_transform(rest, 0.0, 0.6), ValidationError);
}

TEST_CASE("regional flow fractions") {
  const VesselNetwork net = y_network();
  SimulationResult r;
  r.period = 1.0;
  r.time = {0.0, 0.5};
  const double means[] = {10.0, 7.0, 3.0};
  for (int id = 1; id <= 3; ++id) {
    StationSeries s;
    s.vessel_id = id;
    s.x = 0.5 * net.vessel(id).length;
    s.flow = {means[id - 1] - 1.0, means[id - 1] + 1.0};
    s.area = {1.0, 1.0};
    s.pressure = {1e5, 1e5};
    r.stations.push_back(s);
  }
  CHECK(mean_flow(r, net.vessel(2)) == doctest::Approx(7.0));

  const std::vector<Region> root{{"root", {1}}};
  CHECK(flow_fractions(r, net, root, 1)[0].fraction == doctest::Approx(1.0));

  const std::vector<Region> split{{"arch", {2}}, {"brachiocephalic", {3}}};
  const std::vector<Region> joined{{"both", {2, 3}}};
  const auto parts = flow_fractions(r, net, split, 1);
  const auto whole = flow_fractions(r, net, joined, 1);
  CHECK(parts[0].fraction == doctest::Approx(0.7));
  CHECK(parts[0].fraction + parts[1].fraction == doctest::Approx(whole[0].fraction));
  CHECK(whole[0].fraction == doctest::Approx(1.0));

  const std::vector<Region> unknown{{"x", {9}}};
  CHECK_THROWS_AS(flow_fractions(r, net, unknown, 1), ValidationError);
  const std::vector<Region> overlap{{"a", {2}}, {"b", {2, 3}}};
  CHECK_THROWS_AS(flow_fractions(r, net, overlap, 1), ValidationError);
  CHECK_THROWS_AS(flow_fractions(r, net, root, 7), ValidationError);
}

TEST_CASE("report JSON is reproducible") {
  const VesselNetwork net = y_network();
  const Waveform inflow = load_waveform_csv(HEMO1D_DATA_DIR "/dorv_rest_inflow.csv");
  GridConfig g;
  g.max_cycles = 3;
  const int n = choose_samples_per_period(net, inflow.period(), g);
  const SimulationResult result =
      run_simulation(net, inflow, g, Posture::kSupine, resistive_outlets(net, inflow.period(), n, 20.0));
  AnalysisOptions options;
  options.wia_vessels = {1, 2};
  options.brachial_vessel = 3;
  const AnalysisReport report = analyze(result, net, options);
  CHECK(report.heart_rate == doctest::Approx(60.0 / 0.658));
  CHECK(report.vessels.size() == 3);
  CHECK(report.wia.size() == 2);
  CHECK(report.has_brachial);
  CHECK(report.peak_aortic_wss > 0.0);
  CHECK(report_json(report) == report_json(analyze(result, net, options)));
  options.wia_vessels = {4};
  CHECK_THROWS_AS(analyze(result, net, options), ValidationError);
}

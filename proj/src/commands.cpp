#include "hemo1d/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "hemo1d/parallel.hpp"
#include "hemo1d/units.hpp"

namespace hemo1d {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError(fmt::format("cannot read '{}'", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError(fmt::format("cannot write '{}'", path.string()));
  out << text;
}

double series_mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

std::string vessel_file(int id) { return fmt::format("vessel_{:02d}.csv", id); }

}  // namespace

std::string fingerprint(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return fmt::format("{:016x}", h);
}

std::map<int, ImpedanceSpectrum> outlet_spectra(const RunConfig& config, const VesselNetwork& network, double period,
                                                int samples, int workers) {
  const std::vector<int> ids = network.terminal_ids();
  std::vector<ImpedanceSpectrum> spectra(ids.size());
  WorkerPool pool(workers);
  pool.run(ids.size(), [&](std::size_t i) {
    spectra[i] = root_impedance_spectrum(tree_spec_for(config, network, ids[i]), period, samples, config.tree.spectrum);
  });
  std::map<int, ImpedanceSpectrum> out;
  for (std::size_t i = 0; i < ids.size(); ++i) out.emplace(ids[i], std::move(spectra[i]));
  return out;
}

Waveform scenario_inflow(const RunConfig& config) {
  Waveform inflow = load_waveform_csv(config.inflow);
  if (inflow.kind() != WaveformKind::kFlow) throw ValidationError("inflow file must hold a flow waveform (t_s,q_mls)");
  if (config.exercise) inflow = exercise_transform(inflow, config.flow_factor, config.period_factor);
  return inflow;
}

RunOutcome simulate(const RunConfig& config, std::ostream& log) {
  validate_config(config);
  RunOutcome out;
  out.network = assign_gravity_angles(configured_network(config), config.posture);
  out.inflow = scenario_inflow(config);
  for (const auto& w : out.network.warnings()) log << "warning: " << w << "\n";
  const double period = out.inflow.period();
  const int samples = choose_samples_per_period(out.network, period, config.grid);
  log << fmt::format("scenario: {} {}, T = {:.4f} s, mean inflow {:.4f} L/min, N = {}\n", to_string(config.posture),
                     config.exercise ? "exercise" : "rest", period, out.inflow.mean() / kLitrePerMinute, samples);

  auto t0 = Clock::now();
  const auto spectra = outlet_spectra(config, out.network, period, samples, config.grid.workers);
  out.tree_seconds = seconds_since(t0);
  log << fmt::format("structured trees: {} outlets in {:.1f} s\n", spectra.size(), out.tree_seconds);

  t0 = Clock::now();
  Simulation sim(out.network, out.inflow, config.grid, spectra);
  out.result = sim.run();
  out.solve_seconds = seconds_since(t0);
  log << fmt::format("solver: {} cycles ({}), last change {:.2e}, mass error {:.2e}, {:.1f} s\n", out.result.cycles,
                     out.result.converged ? "periodic" : "not periodic",
                     out.result.cycle_changes.empty() ? 0.0 : out.result.cycle_changes.back(),
                     out.result.mass.relative_error, out.solve_seconds);

  if (config.reference.mode == ReferencePressure::Mode::kCuffMean) {
    const Vessel& v = out.network.vessel(config.reference.vessel);
    const double mean = series_mean(out.result.station(v.id, 0.5 * v.length).pressure);
    const double shift = from_mmhg(config.reference.target_mean_mmhg()) - mean;
    for (auto& s : out.result.stations) {
      for (double& p : s.pressure) p += shift;
    }
    out.network = out.network.with_p0(out.network.p0() + shift);
    log << fmt::format("reference pressure: p0 = {:.2f} mmHg (mean {:.2f} mmHg at vessel {})\n",
                       to_mmhg(out.network.p0()), config.reference.target_mean_mmhg(), v.id);
  }
  out.reference_pressure_mmhg = to_mmhg(out.network.p0());
  out.report = analyze(out.result, out.network, config.analysis);
  return out;
}

void write_outputs(const RunConfig& config, const RunOutcome& outcome, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "vessels");
  fs::create_directories(dir / "wia");
  const SimulationResult& r = outcome.result;
  for (const Vessel& v : outcome.network.vessels()) {
    std::string text = "t_s,x_cm,p_mmHg,q_mls,A_cm2\n";
    for (const auto& s : r.stations) {
      if (s.vessel_id != v.id) continue;
      for (std::size_t k = 0; k < r.time.size(); ++k) {
        text += fmt::format("{},{},{},{},{}\n", r.time[k], s.x, to_mmhg(s.pressure[k]), s.flow[k], s.area[k]);
      }
    }
    write_text(dir / "vessels" / vessel_file(v.id), text);
  }
  for (const auto& w : outcome.report.wia) write_wia_csv(w, dir / "wia" / fmt::format("wia_vessel_{:02d}.csv", w.vessel_id));
  write_waveform_csv(outcome.inflow, dir / "inflow.csv");
  write_text(dir / "report.json", report_json(outcome.report));

  const std::string cfg = config_json(config);
  nlohmann::ordered_json m;
  m["tool"] = "hemo1d";
  m["config_fingerprint"] = fingerprint(cfg);
  m["network_fingerprint"] = fingerprint(slurp(config.network));
  m["inflow_fingerprint"] = fingerprint(slurp(config.inflow));
  m["config"] = nlohmann::ordered_json::parse(cfg);
  m["period_s"] = r.period;
  m["dt_s"] = r.dt;
  m["samples_per_period"] = r.samples_per_period;
  m["recorded_samples"] = r.time.size();
  m["total_grid_points"] = r.total_grid_points;
  m["cycles"] = r.cycles;
  m["converged"] = r.converged;
  m["cycle_changes"] = r.cycle_changes;
  m["reference_pressure_mmhg"] = outcome.reference_pressure_mmhg;
  m["mass_audit"] = {{"inflow_ml", r.mass.inflow_volume},
                     {"outflow_ml", r.mass.outflow_volume},
                     {"stored_change_ml", r.mass.stored_change},
                     {"relative_error", r.mass.relative_error}};
  m["junction_residuals"] = {{"max_flow", r.max_flow_residual},
                             {"max_pressure", r.max_pressure_residual},
                             {"max_newton_iterations", r.max_newton_iterations}};
  write_text(dir / "manifest.json", m.dump(2) + "\n");

  nlohmann::ordered_json s;
  s["cycles"] = r.cycles;
  s["converged"] = r.converged;
  s["steps"] = r.steps;
  s["mass_relative_error"] = r.mass.relative_error;
  s["max_junction_flow_residual"] = r.max_flow_residual;
  s["max_junction_pressure_residual"] = r.max_pressure_residual;
  s["workers"] = config.grid.workers;
  s["tree_seconds"] = outcome.tree_seconds;
  s["solve_seconds"] = outcome.solve_seconds;
  write_text(dir / "run_summary.json", s.dump(2) + "\n");
}

RunOutcome cmd_run(const RunConfig& config, std::ostream& log) {
  RunOutcome out = simulate(config, log);
  write_outputs(config, out, config.output);
  log << "wrote " << config.output.string() << "\n";
  return out;
}

CheckReport cmd_check(const RunConfig& config) {
  CheckReport report;
  validate_config(config);
  const VesselNetwork net = assign_gravity_angles(configured_network(config), config.posture);
  for (const auto& w : net.warnings()) report.findings.push_back("warning: " + w);
  const Waveform inflow = scenario_inflow(config);
  report.period = inflow.period();
  report.max_dt = estimate_max_dt(net, config.grid);
  report.samples_per_period = choose_samples_per_period(net, report.period, config.grid);
  report.terminals = static_cast<int>(net.terminal_ids().size());
  for (const auto& v : net.vessels()) report.total_grid_points += grid_points(v.length, config.grid);
  for (int id : net.terminal_ids()) {
    StructuredTreeSpec spec = tree_spec_for(config, net, id);
    spec.validate();
    if (spec.root_radius < spec.r_min) {
      report.findings.push_back(fmt::format("note: vessel {} outlet radius {} cm is below r_min {} cm", id,
                                            spec.root_radius, spec.r_min));
    }
  }
  if (config.measured_flows) {
    const FlowScaling s = scale_measured_flows(load_measured_flows(*config.measured_flows));
    for (const auto& p : s.planes) {
      if (std::abs(p.factor - 1.0) > 1e-12) {
        report.findings.push_back(fmt::format("flow scaling: {} {:.3f} -> {:.3f} L/min (factor {:.4f})", p.name,
                                              p.measured_lmin, p.scaled_lmin, p.factor));
      }
    }
    const auto& planes = s.scaled.planes;
    auto root = std::find_if(planes.begin(), planes.end(), [](const FlowPlane& p) { return !p.parent; });
    if (root != planes.end()) {
      const double mean = inflow.mean() / kLitrePerMinute / (config.exercise ? config.flow_factor : 1.0);
      if (std::abs(mean - root->mean_lmin) > 0.01 * root->mean_lmin) {
        report.ok = false;
        report.findings.push_back(fmt::format("error: inflow mean {:.3f} L/min differs from scaled root plane {:.3f} L/min",
                                              mean, root->mean_lmin));
      }
    }
  }
  return report;
}

std::string format_check(const CheckReport& r) {
  std::string s = r.ok ? "OK\n" : "FAILED\n";
  s += fmt::format("period {:.4f} s, estimated max dt {:.3e} s, N = {} (dt = {:.3e} s)\n", r.period, r.max_dt,
                   r.samples_per_period, r.period / r.samples_per_period);
  s += fmt::format("{} grid points, {} structured-tree outlets\n", r.total_grid_points, r.terminals);
  for (const auto& f : r.findings) s += f + "\n";
  return s;
}

SimulationResult load_run_series(const std::filesystem::path& run_dir, const VesselNetwork& network) {
  SimulationResult r;
  for (const Vessel& v : network.vessels()) {
    const auto path = run_dir / "vessels" / vessel_file(v.id);
    std::istringstream in(slurp(path));
    std::string line;
    std::getline(in, line);
    if (line.rfind("t_s,x_cm,p_mmHg,q_mls,A_cm2", 0) != 0) {
      throw ParseError(fmt::format("{}: unexpected header '{}'", path.string(), line));
    }
    std::vector<double> times;
    std::size_t current = r.stations.size();
    int row = 1;
    while (std::getline(in, line)) {
      ++row;
      if (line.empty()) continue;
      double t, x, p, q, a;
      if (std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf,%lf", &t, &x, &p, &q, &a) != 5) {
        throw ParseError(fmt::format("{}:{}: expected five numbers", path.string(), row));
      }
      if (current == r.stations.size() || r.stations[current].x != x) {
        if (current != r.stations.size() && times.size() != r.time.size() && !r.time.empty()) {
          throw ParseError(fmt::format("{}: station lengths differ", path.string()));
        }
        if (r.time.empty() && current != r.stations.size()) r.time = times;
        current = r.stations.size();
        r.stations.push_back({v.id, x, {}, {}, {}});
        times.clear();
      }
      times.push_back(t);
      StationSeries& s = r.stations[current];
      s.pressure.push_back(from_mmhg(p));
      s.flow.push_back(q);
      s.area.push_back(a);
    }
    if (r.time.empty()) r.time = times;
    if (times.size() != r.time.size()) throw ParseError(fmt::format("{}: station lengths differ", path.string()));
  }
  if (r.time.size() < 2) throw ParseError("saved run has fewer than two samples per station");
  const double dt = r.time[1] - r.time[0];
  r.period = dt * static_cast<double>(r.time.size());
  r.dt = dt;
  return r;
}

AnalysisReport cmd_analyze(const RunConfig& config, const std::filesystem::path& run_dir,
                           const std::filesystem::path& out_dir) {
  VesselNetwork net = configured_network(config);
  const auto manifest_path = run_dir / "manifest.json";
  double period = 0.0;
  if (std::filesystem::exists(manifest_path)) {
    const auto m = nlohmann::json::parse(slurp(manifest_path));
    net = net.with_p0(from_mmhg(m.at("reference_pressure_mmhg").get<double>()));
    period = m.at("period_s").get<double>();
  }
  SimulationResult r = load_run_series(run_dir, net);
  if (period > 0.0) {
    r.period = period;
    r.dt = period / static_cast<double>(r.time.size());
  }
  AnalysisReport report = analyze(r, net, config.analysis);
  std::filesystem::create_directories(out_dir / "wia");
  write_text(out_dir / "report.json", report_json(report));
  for (const auto& w : report.wia) write_wia_csv(w, out_dir / "wia" / fmt::format("wia_vessel_{:02d}.csv", w.vessel_id));
  return report;
}

std::string scaling_json(const FlowScaling& scaling) {
  nlohmann::ordered_json j;
  auto& planes = j["planes"] = nlohmann::ordered_json::array();
  for (const auto& p : scaling.planes) {
    planes.push_back({{"name", p.name}, {"measured_lmin", p.measured_lmin}, {"scaled_lmin", p.scaled_lmin}, {"factor", p.factor}});
  }
  j["max_relative_residual"] = scaling.max_relative_residual;
  return j.dump(2) + "\n";
}

FlowScaling cmd_scale_flows(const std::filesystem::path& path, std::ostream& out) {
  const FlowScaling s = scale_measured_flows(load_measured_flows(path));
  out << fmt::format("{:<24} {:>10} {:>10} {:>8}\n", "plane", "measured", "scaled", "factor");
  for (const auto& p : s.planes) {
    out << fmt::format("{:<24} {:>10.3f} {:>10.3f} {:>8.4f}\n", p.name, p.measured_lmin, p.scaled_lmin, p.factor);
  }
  out << fmt::format("max junction residual {:.2e} (relative)\n", s.max_relative_residual);
  return s;
}

}  // namespace hemo1d

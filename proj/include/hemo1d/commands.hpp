#pragma once

#include <filesystem>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "hemo1d/analysis.hpp"
#include "hemo1d/config.hpp"
#include "hemo1d/solver.hpp"

namespace hemo1d {

/// Root impedance spectra for every terminal vessel, evaluated on `workers` threads.
std::map<int, ImpedanceSpectrum> outlet_spectra(const RunConfig& config, const VesselNetwork& network, double period,
                                                int samples, int workers);

/// Inflow for the scenario: the file waveform, exercise-transformed when enabled.
Waveform scenario_inflow(const RunConfig& config);

struct RunOutcome {
  VesselNetwork network;  // configured, posture applied, p0 as used for output
  Waveform inflow;
  SimulationResult result;
  AnalysisReport report;
  double reference_pressure_mmhg = 0.0;
  double tree_seconds = 0.0;
  double solve_seconds = 0.0;
};

/// Builds the scenario, precomputes tree spectra, runs to periodicity and
/// analyses the last cycle. Writes nothing.
RunOutcome simulate(const RunConfig& config, std::ostream& log);

/// Writes per-vessel CSVs (t_s,x_cm,p_mmHg,q_mls,A_cm2), WIA CSVs,
/// report.json, manifest.json (reproducible) and run_summary.json (timings).
void write_outputs(const RunConfig& config, const RunOutcome& outcome, const std::filesystem::path& dir);

/// simulate + write_outputs into config.output.
RunOutcome cmd_run(const RunConfig& config, std::ostream& log);

struct CheckReport {
  bool ok = true;
  std::vector<std::string> findings;
  double period = 0.0;        // s, after the exercise transform
  double max_dt = 0.0;        // s
  int samples_per_period = 0;
  int total_grid_points = 0;
  int terminals = 0;
};

/// Loads and validates inputs, dry-runs the flow scaling and estimates the
/// time step, without stepping.
CheckReport cmd_check(const RunConfig& config);
std::string format_check(const CheckReport& report);

/// Reads the station series written by a run back in.
SimulationResult load_run_series(const std::filesystem::path& run_dir, const VesselNetwork& network);

/// Recomputes the analysis from saved series and writes report.json (and the
/// WIA CSVs) into out_dir.
AnalysisReport cmd_analyze(const RunConfig& config, const std::filesystem::path& run_dir,
                           const std::filesystem::path& out_dir);

/// Scales a measured flow set and prints a table of factors.
FlowScaling cmd_scale_flows(const std::filesystem::path& path, std::ostream& out);
std::string scaling_json(const FlowScaling& scaling);

/// 64-bit FNV-1a, used to fingerprint inputs in the manifest.
std::string fingerprint(const std::string& bytes);

}  // namespace hemo1d

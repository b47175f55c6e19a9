// hemo1d command-line front end. Exit codes: 0 success, 1 invalid input,
// 2 numerical failure.
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "hemo1d/commands.hpp"
#include "hemo1d/config.hpp"
#include "hemo1d/units.hpp"

namespace {

using namespace hemo1d;

struct ScenarioFlags {
  std::string config;
  std::string network;
  std::string inflow;
  std::string posture;
  bool exercise = false;
  std::optional<double> flow_factor;
  std::optional<double> period_factor;
  std::optional<double> grid_dx;
  std::optional<int> cycles;
  std::optional<int> workers;
  std::string out;
};

void add_scenario_flags(CLI::App* cmd, ScenarioFlags& f) {
  cmd->add_option("--config", f.config, "Run configuration JSON");
  cmd->add_option("--network", f.network, "Network JSON (overrides the config)");
  cmd->add_option("--inflow", f.inflow, "Inflow CSV t_s,q_mls (overrides the config)");
  cmd->add_option("--posture", f.posture, "supine or upright")->check(CLI::IsMember({"supine", "upright"}));
  cmd->add_flag("--exercise", f.exercise, "Apply the exercise inflow transform");
  cmd->add_option("--flow-factor", f.flow_factor, "Exercise flow factor");
  cmd->add_option("--period-factor", f.period_factor, "Exercise period factor");
  cmd->add_option("--grid-dx", f.grid_dx, "Target spatial step, cm");
  cmd->add_option("--cycles", f.cycles, "Maximum number of cardiac cycles");
  cmd->add_option("--workers", f.workers, "Worker threads");
  cmd->add_option("--out", f.out, "Output directory");
}

RunConfig build_config(const ScenarioFlags& f) {
  RunConfig cfg;
  if (!f.config.empty()) {
    cfg = parse_config(f.config);
  } else if (f.network.empty() || f.inflow.empty()) {
    throw ValidationError("either --config or both --network and --inflow are required");
  }
  if (!f.network.empty()) cfg.network = f.network;
  if (!f.inflow.empty()) cfg.inflow = f.inflow;
  if (!f.posture.empty()) cfg.posture = parse_posture(f.posture);
  if (f.exercise) cfg.exercise = true;
  if (f.flow_factor) cfg.flow_factor = *f.flow_factor;
  if (f.period_factor) cfg.period_factor = *f.period_factor;
  if (f.grid_dx) cfg.grid.dx = *f.grid_dx;
  if (f.cycles) cfg.grid.max_cycles = *f.cycles;
  if (f.workers) cfg.grid.workers = *f.workers;
  if (!f.out.empty()) cfg.output = f.out;
  if (!(cfg.flow_factor > 0.0) || !(cfg.period_factor > 0.0)) throw ValidationError("exercise factors must be positive");
  cfg.grid.min_cycles = std::min(cfg.grid.min_cycles, cfg.grid.max_cycles);
  cfg.grid.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"1D arterial network haemodynamics with structured-tree outflow"};
  app.require_subcommand(1);

  ScenarioFlags run_flags, check_flags, analyze_flags;
  auto* run = app.add_subcommand("run", "Simulate a scenario and write time series and the analysis report");
  add_scenario_flags(run, run_flags);
  auto* check = app.add_subcommand("check", "Validate inputs and estimate the time step without simulating");
  add_scenario_flags(check, check_flags);
  auto* analyze = app.add_subcommand("analyze", "Recompute the analysis report from a saved run");
  add_scenario_flags(analyze, analyze_flags);
  std::string run_dir;
  analyze->add_option("--run", run_dir, "Directory written by `run`")->required();
  auto* scale = app.add_subcommand("scale-flows", "Make measured plane flows conservative");
  std::string flows_path;
  std::string flows_json;
  scale->add_option("flows", flows_path, "Measured flows JSON")->required();
  scale->add_option("--json", flows_json, "Also write the scaled set as JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (run->parsed()) {
      const RunConfig cfg = build_config(run_flags);
      const RunOutcome out = cmd_run(cfg, std::cerr);
      const AnalysisReport& r = out.report;
      std::cout << fmt::format("aortic {:.1f}/{:.1f} mmHg", r.aortic_mmhg.systolic, r.aortic_mmhg.diastolic);
      if (r.has_brachial) std::cout << fmt::format(", brachial {:.1f}/{:.1f} mmHg", r.brachial_mmhg.systolic, r.brachial_mmhg.diastolic);
      std::cout << fmt::format(", peak aortic WSS {:.1f} g/cm/s^2, heart rate {:.0f} bpm\n", r.peak_aortic_wss, r.heart_rate);
      if (!out.result.converged) std::cerr << "warning: the run did not reach the periodicity tolerance\n";
    } else if (check->parsed()) {
      const CheckReport report = cmd_check(build_config(check_flags));
      std::cout << format_check(report);
      return report.ok ? 0 : 1;
    } else if (analyze->parsed()) {
      const RunConfig cfg = build_config(analyze_flags);
      const std::filesystem::path out = analyze_flags.out.empty() ? std::filesystem::path(run_dir) : cfg.output;
      cmd_analyze(cfg, run_dir, out);
      std::cout << "wrote " << (out / "report.json").string() << "\n";
    } else if (scale->parsed()) {
      const FlowScaling s = cmd_scale_flows(flows_path, std::cout);
      if (!flows_json.empty()) {
        std::ofstream(flows_json) << scaling_json(s);
      }
    }
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 2;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

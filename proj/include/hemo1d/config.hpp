#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "hemo1d/analysis.hpp"
#include "hemo1d/network.hpp"
#include "hemo1d/solver.hpp"
#include "hemo1d/structured_tree.hpp"

namespace hemo1d {

/// How p0 of the wall law is chosen. Pressure enters the dynamics only through
/// p - p0, so p0 is a pure offset and can be set after the run.
struct ReferencePressure {
  enum class Mode { kFixed, kCuffMean };
  Mode mode = Mode::kFixed;
  double mmhg = 0.0;  // kFixed
  // kCuffMean: p0 is chosen so the time-averaged pressure at the midpoint of
  // `vessel` equals diastolic + (systolic - diastolic) / 3.
  int vessel = 0;
  double systolic_mmhg = 0.0;
  double diastolic_mmhg = 0.0;

  double target_mean_mmhg() const { return diastolic_mmhg + (systolic_mmhg - diastolic_mmhg) / 3.0; }
};

struct TreeDefaults {
  double alpha = 0.90;
  double beta = 0.60;
  double r_min = 0.01;  // cm
  double lrr = 50.0;
  int max_generations = 60;
  SpectrumOptions spectrum{1024, 8};
};

struct ParameterOverride {
  std::vector<int> vessels;
  std::optional<double> k3;
  std::optional<double> r_min;
};

struct RunConfig {
  std::filesystem::path source;  // empty when built from flags only
  std::filesystem::path network;
  std::filesystem::path inflow;
  std::optional<std::filesystem::path> measured_flows;
  Posture posture = Posture::kSupine;
  bool exercise = false;
  double flow_factor = 2.0;
  double period_factor = 0.6;
  std::optional<StiffnessParams> stiffness;  // replaces the network file's constants
  std::optional<FluidParams> fluid;
  ReferencePressure reference;
  TreeDefaults tree;
  std::vector<ParameterOverride> overrides;
  GridConfig grid;
  AnalysisOptions analysis;
  std::filesystem::path output = "out";
};

/// Reads a run configuration; relative paths are resolved against the
/// directory of the file. Throws ParseError / ValidationError with the JSON
/// path of the offending field.
RunConfig parse_config(const std::filesystem::path& path);
RunConfig parse_config_text(const std::string& json_text, const std::filesystem::path& base_dir = {});

/// Checks referenced files and vessel ids against the network.
void validate_config(const RunConfig& config);

/// Network with the configured stiffness, fluid and per-vessel overrides applied.
VesselNetwork configured_network(const RunConfig& config);

/// Structured-tree spec for one terminal vessel of a configured network.
StructuredTreeSpec tree_spec_for(const RunConfig& config, const VesselNetwork& network, int vessel_id);

/// Canonical JSON form of the configuration. Leaves out the output directory
/// and worker count, neither of which may change results.
std::string config_json(const RunConfig& config);

enum class PlaneRole { kTrunk, kBranch };

/// One measured flow plane. Children of a plane are the planes naming it as
/// parent: at most one trunk (the continuing vessel) and any number of branches.
struct FlowPlane {
  std::string name;
  double mean_lmin = 0.0;
  std::optional<std::string> parent;
  PlaneRole role = PlaneRole::kBranch;
  std::optional<double> target_lmin;  // prescribed value after scaling
};

struct MeasuredFlowSet {
  std::optional<double> inflow_lmin;  // overrides the root plane when present
  std::vector<FlowPlane> planes;
};

struct ScaledPlane {
  std::string name;
  double measured_lmin = 0.0;
  double scaled_lmin = 0.0;
  double factor = 1.0;
};

struct FlowScaling {
  MeasuredFlowSet scaled;
  std::vector<ScaledPlane> planes;  // same order as the input
  double max_relative_residual = 0.0;  // |parent - children| / parent over all planes with children
};

MeasuredFlowSet load_measured_flows(const std::filesystem::path& path);
MeasuredFlowSet parse_measured_flows(const std::string& json_text);

/// Makes the plane means conservative top-down. A root takes inflow_lmin, else
/// its target, else its measurement. A trunk takes its target, else the smaller
/// of its measurement and its parent's scaled value (the whole parent when it
/// has no sibling branches). Branches share one factor so they sum to
/// parent - trunk. Throws ValidationError when that remainder is negative or
/// cannot be met.
FlowScaling scale_measured_flows(const MeasuredFlowSet& set);

}  // namespace hemo1d

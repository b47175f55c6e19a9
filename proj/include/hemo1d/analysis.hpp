#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "hemo1d/network.hpp"
#include "hemo1d/solver.hpp"
#include "hemo1d/waveform.hpp"

namespace hemo1d {

enum class WaveClass { kNone, kForwardCompression, kForwardExpansion, kBackwardCompression, kBackwardExpansion };

/// FCW, FEW, BCW, BEW (or "none").
std::string to_string(WaveClass kind);

/// Contiguous samples [begin, end) of one wave class.
struct WaveSegment {
  WaveClass kind = WaveClass::kNone;
  int begin = 0;
  int end = 0;
  double peak_intensity = 0.0;  // signed, largest magnitude in the segment
};

/// Wave intensity decomposition of one period of p, u at a fixed location.
/// Rates are centred differences on the periodic grid; cumulative waves start
/// at zero at t = 0.
struct WiaResult {
  double dt = 0.0;     // s
  double rho_c = 0.0;  // g/cm^2/s
  std::vector<double> dp_dt, du_dt;
  std::vector<double> dp_plus_dt, dp_minus_dt;  // g/cm/s^3
  std::vector<double> du_plus_dt, du_minus_dt;  // cm/s^2
  std::vector<double> wi_plus, wi_minus;        // (dp/dt)(du/dt)
  std::vector<double> p_plus, p_minus;          // g/cm/s^2
  std::vector<double> u_plus, u_minus;          // cm/s
  std::vector<WaveSegment> segments;            // forward and backward, ordered by begin

  std::size_t size() const { return dp_dt.size(); }
};

/// Splits pressure (g/cm/s^2) and velocity q/A into forward and backward waves
/// with dp+- = (dp +- rho c du)/2 and du+- = (du +- dp/(rho c))/2. Throws
/// ValidationError on length mismatch, fewer than 3 samples or c <= 0.
WiaResult wia_decompose(std::span<const double> pressure, std::span<const double> flow,
                        std::span<const double> area, double rho, double c, double dt);

/// Samples [begin, end] (inclusive, may wrap past the end of the period) over
/// which the reflection coefficient is measured: from the foot of the positive
/// dp+ run holding the largest dp+ to where dp+ returns to >= 0 after its
/// following negative run.
struct CompressionWindow {
  int begin = 0;
  int end = 0;
};
CompressionWindow compression_window(const WiaResult& wia);

/// I_R = (max - min of p-) / (max - min of p+) over the compression window.
/// Throws NumericalError when the incident amplitude is zero.
double reflection_coefficient(const WiaResult& wia);

/// Stokes boundary layer thickness sqrt(nu T / 2 pi), cm.
double boundary_layer_thickness(double nu, double period);

/// tau_w = mu (q/A) / delta, g/cm/s^2.
std::vector<double> wall_shear_stress(std::span<const double> flow, std::span<const double> area, double mu,
                                      double delta);

struct Region {
  std::string name;
  std::vector<int> vessel_ids;
};

struct RegionFraction {
  std::string name;
  double mean_flow = 0.0;  // mL/s
  double fraction = 0.0;
};

/// Mean flow over the recorded period at the vessel midpoint station, mL/s.
double mean_flow(const SimulationResult& result, const Vessel& vessel);

/// Region mean flow divided by the mean flow of the reference (ascending aorta)
/// vessel. Regions must be disjoint and name existing vessels.
std::vector<RegionFraction> flow_fractions(const SimulationResult& result, const VesselNetwork& network,
                                           std::span<const Region> regions, int reference_vessel);

/// Values times flow_factor, period times period_factor, resampled to the
/// original sample count.
Waveform exercise_transform(const Waveform& inflow, double flow_factor = 2.0, double period_factor = 0.6);

struct PressureStats {
  double systolic = 0.0;
  double diastolic = 0.0;
  double pulse = 0.0;
};

/// Max, min and their difference, in the units of the input.
PressureStats pressure_stats(std::span<const double> pressure);

struct AnalysisOptions {
  std::vector<int> wia_vessels;
  int aortic_vessel = 0;    // 0: network root
  int brachial_vessel = 0;  // 0: none
  std::vector<Region> regions;
};

struct VesselSummary {
  int id = 0;
  std::string name;
  PressureStats pressure_mmhg;  // at the midpoint
  double mean_flow = 0.0;       // mL/s
  double peak_wss = 0.0;        // largest |tau_w| at the midpoint
  double wave_speed = 0.0;      // reference speed at the midpoint, cm/s
};

struct WiaSummary {
  int vessel_id = 0;
  WiaResult wia;
  double reflection = 0.0;
  bool reflection_defined = false;
  std::vector<double> wss;  // at the same station
};

struct AnalysisReport {
  double period = 0.0;      // s
  double heart_rate = 0.0;  // beats per minute
  double mean_inflow = 0.0;  // mL/s at the root inlet
  double reference_pressure_mmhg = 0.0;
  PressureStats aortic_mmhg;
  PressureStats brachial_mmhg;
  bool has_brachial = false;
  double peak_aortic_wss = 0.0;  // over the WIA vessels
  std::vector<VesselSummary> vessels;
  std::vector<RegionFraction> regions;
  std::vector<WiaSummary> wia;
};

AnalysisReport analyze(const SimulationResult& result, const VesselNetwork& network, const AnalysisOptions& options);

/// Report as pretty JSON without timing information, so equal inputs give equal text.
std::string report_json(const AnalysisReport& report);

/// CSV with t_s, WIA rates, intensities, cumulative waves and tau_w.
void write_wia_csv(const WiaSummary& summary, const std::filesystem::path& path);

}  // namespace hemo1d

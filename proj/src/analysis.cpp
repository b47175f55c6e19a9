#include "hemo1d/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include <fmt/format.h>
#include <json.hpp>

#include "hemo1d/units.hpp"
#include "hemo1d/wall.hpp"

namespace hemo1d {

std::string to_string(WaveClass kind) {
  switch (kind) {
    case WaveClass::kForwardCompression: return "FCW";
    case WaveClass::kForwardExpansion: return "FEW";
    case WaveClass::kBackwardCompression: return "BCW";
    case WaveClass::kBackwardExpansion: return "BEW";
    case WaveClass::kNone: break;
  }
  return "none";
}

namespace {

std::vector<double> centred_rate(std::span<const double> x, double dt) {
  const std::size_t n = x.size();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = (x[(i + 1) % n] - x[(i + n - 1) % n]) / (2.0 * dt);
  return out;
}

// Runs of one class in a channel; samples whose intensity is below 1e-3 of
// `peak` (the largest intensity in either direction) are left unclassified.
void collect_segments(const std::vector<double>& wi, const std::vector<double>& dp, double peak,
                      WaveClass compression, WaveClass expansion, std::vector<WaveSegment>& out) {
  if (peak == 0.0) return;
  const int n = static_cast<int>(wi.size());
  WaveSegment current;
  for (int i = 0; i <= n; ++i) {
    WaveClass kind = WaveClass::kNone;
    if (i < n && std::abs(wi[i]) > 1e-3 * peak) kind = dp[i] > 0.0 ? compression : expansion;
    if (kind != current.kind) {
      if (current.kind != WaveClass::kNone) {
        current.end = i;
        out.push_back(current);
      }
      current = {kind, i, i, 0.0};
    }
    if (kind != WaveClass::kNone && std::abs(wi[i]) > std::abs(current.peak_intensity)) current.peak_intensity = wi[i];
  }
}

}  // namespace

WiaResult wia_decompose(std::span<const double> pressure, std::span<const double> flow, std::span<const double> area,
                        double rho, double c, double dt) {
  const std::size_t n = pressure.size();
  if (flow.size() != n || area.size() != n) {
    throw ValidationError(fmt::format("wia: series lengths differ (p {}, q {}, A {})", n, flow.size(), area.size()));
  }
  if (n < 3) throw ValidationError("wia: need at least 3 samples");
  if (!(c > 0.0) || !(rho > 0.0) || !(dt > 0.0)) throw ValidationError("wia: rho, c and dt must be positive");
  std::vector<double> u(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(area[i] > 0.0)) throw ValidationError("wia: areas must be positive");
    u[i] = flow[i] / area[i];
  }
  WiaResult r;
  r.dt = dt;
  r.rho_c = rho * c;
  r.dp_dt = centred_rate(pressure, dt);
  r.du_dt = centred_rate(u, dt);
  for (auto* v : {&r.dp_plus_dt, &r.dp_minus_dt, &r.du_plus_dt, &r.du_minus_dt, &r.wi_plus, &r.wi_minus, &r.p_plus,
                  &r.p_minus, &r.u_plus, &r.u_minus}) {
    v->resize(n);
  }
  for (std::size_t i = 0; i < n; ++i) {
    const double dp = r.dp_dt[i];
    const double du = r.du_dt[i];
    r.dp_plus_dt[i] = 0.5 * (dp + r.rho_c * du);
    r.dp_minus_dt[i] = 0.5 * (dp - r.rho_c * du);
    r.du_plus_dt[i] = 0.5 * (du + dp / r.rho_c);
    r.du_minus_dt[i] = 0.5 * (du - dp / r.rho_c);
    r.wi_plus[i] = r.dp_plus_dt[i] * r.du_plus_dt[i];
    r.wi_minus[i] = r.dp_minus_dt[i] * r.du_minus_dt[i];
    // Sample increments telescope, so the cumulative waves are the split of
    // the change since t = 0.
    const double dp0 = pressure[i] - pressure[0];
    const double du0 = u[i] - u[0];
    r.p_plus[i] = 0.5 * (dp0 + r.rho_c * du0);
    r.p_minus[i] = 0.5 * (dp0 - r.rho_c * du0);
    r.u_plus[i] = 0.5 * (du0 + dp0 / r.rho_c);
    r.u_minus[i] = 0.5 * (du0 - dp0 / r.rho_c);
  }
  double peak = 0.0;
  for (std::size_t i = 0; i < n; ++i) peak = std::max({peak, std::abs(r.wi_plus[i]), std::abs(r.wi_minus[i])});
  collect_segments(r.wi_plus, r.dp_plus_dt, peak, WaveClass::kForwardCompression, WaveClass::kForwardExpansion,
                   r.segments);
  collect_segments(r.wi_minus, r.dp_minus_dt, peak, WaveClass::kBackwardCompression, WaveClass::kBackwardExpansion,
                   r.segments);
  std::stable_sort(r.segments.begin(), r.segments.end(),
                   [](const WaveSegment& a, const WaveSegment& b) { return a.begin < b.begin; });
  return r;
}

CompressionWindow compression_window(const WiaResult& wia) {
  const auto& d = wia.dp_plus_dt;
  const int n = static_cast<int>(d.size());
  if (n == 0) throw ValidationError("wia: empty result");
  const int peak = static_cast<int>(std::max_element(d.begin(), d.end()) - d.begin());
  if (!(d[peak] > 0.0)) throw NumericalError("wia: no forward compression");
  auto wrap = [n](int i) { return ((i % n) + n) % n; };
  int begin = peak;
  for (int k = 0; k < n - 1 && d[wrap(begin - 1)] > 0.0; ++k) begin = wrap(begin - 1);
  int end = peak;
  int k = 0;
  while (k < n - 1 && d[wrap(end + 1)] >= 0.0) {  // rest of the compression run
    end = wrap(end + 1);
    ++k;
  }
  while (k < n - 1 && d[wrap(end + 1)] < 0.0) {  // the following expansion
    end = wrap(end + 1);
    ++k;
  }
  if (k < n - 1) end = wrap(end + 1);
  return {begin, end};
}

double reflection_coefficient(const WiaResult& wia) {
  const CompressionWindow w = compression_window(wia);
  const int n = static_cast<int>(wia.size());
  double pmin = wia.p_plus[w.begin], pmax = pmin;
  double mmin = wia.p_minus[w.begin], mmax = mmin;
  for (int i = w.begin;; i = (i + 1) % n) {
    pmin = std::min(pmin, wia.p_plus[i]);
    pmax = std::max(pmax, wia.p_plus[i]);
    mmin = std::min(mmin, wia.p_minus[i]);
    mmax = std::max(mmax, wia.p_minus[i]);
    if (i == w.end) break;
  }
  const double incident = pmax - pmin;
  if (!(incident > 0.0)) throw NumericalError("reflection coefficient: zero incident amplitude");
  return (mmax - mmin) / incident;
}

double boundary_layer_thickness(double nu, double period) {
  if (!(nu > 0.0) || !(period > 0.0)) throw ValidationError("boundary layer: nu and T must be positive");
  return std::sqrt(nu * period / (2.0 * kPi));
}

std::vector<double> wall_shear_stress(std::span<const double> flow, std::span<const double> area, double mu,
                                      double delta) {
  if (flow.size() != area.size()) throw ValidationError("wss: series lengths differ");
  if (!(delta > 0.0)) throw ValidationError("wss: delta must be positive");
  std::vector<double> tau(flow.size());
  for (std::size_t i = 0; i < flow.size(); ++i) {
    if (!(area[i] > 0.0)) throw ValidationError("wss: areas must be positive");
    tau[i] = mu * (flow[i] / area[i]) / delta;
  }
  return tau;
}

double mean_flow(const SimulationResult& result, const Vessel& vessel) {
  const StationSeries& s = result.station(vessel.id, 0.5 * vessel.length);
  double sum = 0.0;
  for (double q : s.flow) sum += q;
  return s.flow.empty() ? 0.0 : sum / static_cast<double>(s.flow.size());
}

std::vector<RegionFraction> flow_fractions(const SimulationResult& result, const VesselNetwork& network,
                                           std::span<const Region> regions, int reference_vessel) {
  if (!network.contains(reference_vessel)) {
    throw ValidationError(fmt::format("flow fractions: unknown reference vessel {}", reference_vessel));
  }
  const double reference = mean_flow(result, network.vessel(reference_vessel));
  if (reference == 0.0) throw NumericalError("flow fractions: reference vessel carries no mean flow");
  std::set<int> seen;
  std::vector<RegionFraction> out;
  for (const Region& region : regions) {
    RegionFraction f;
    f.name = region.name;
    for (int id : region.vessel_ids) {
      if (!network.contains(id)) throw ValidationError(fmt::format("region {}: unknown vessel {}", region.name, id));
      if (!seen.insert(id).second) {
        throw ValidationError(fmt::format("region {}: vessel {} already belongs to another region", region.name, id));
      }
      f.mean_flow += mean_flow(result, network.vessel(id));
    }
    f.fraction = f.mean_flow / reference;
    out.push_back(f);
  }
  return out;
}

Waveform exercise_transform(const Waveform& inflow, double flow_factor, double period_factor) {
  if (!(flow_factor > 0.0) || !(period_factor > 0.0)) throw ValidationError("exercise: factors must be positive");
  return inflow.scaled(flow_factor, period_factor).resampled(static_cast<int>(inflow.size()));
}

PressureStats pressure_stats(std::span<const double> pressure) {
  if (pressure.empty()) throw ValidationError("pressure stats: empty series");
  const auto [lo, hi] = std::minmax_element(pressure.begin(), pressure.end());
  return {*hi, *lo, *hi - *lo};
}

namespace {

PressureStats to_mmhg(const PressureStats& s) {
  return {hemo1d::to_mmhg(s.systolic), hemo1d::to_mmhg(s.diastolic), hemo1d::to_mmhg(s.pulse)};
}

double reference_speed(const VesselNetwork& network, const Vessel& v, double x) {
  const WallLaw law = WallLaw::make(radius_at(v.taper, x), network.stiffness_for(v));
  return wave_speed_reference(law, network.fluid().rho);
}

}  // namespace

AnalysisReport analyze(const SimulationResult& result, const VesselNetwork& network, const AnalysisOptions& options) {
  AnalysisReport report;
  report.period = result.period;
  report.heart_rate = 60.0 / result.period;
  report.reference_pressure_mmhg = hemo1d::to_mmhg(network.p0());
  const double delta = boundary_layer_thickness(network.fluid().nu(), result.period);
  const double mu = network.fluid().mu;

  const Vessel& root = network.vessel(network.root_id());
  {
    const auto& inlet = result.station(root.id, 0.0);
    double sum = 0.0;
    for (double q : inlet.flow) sum += q;
    report.mean_inflow = inlet.flow.empty() ? 0.0 : sum / static_cast<double>(inlet.flow.size());
  }

  for (const Vessel& v : network.vessels()) {
    const StationSeries& s = result.station(v.id, 0.5 * v.length);
    VesselSummary vs;
    vs.id = v.id;
    vs.name = v.name;
    vs.pressure_mmhg = to_mmhg(pressure_stats(s.pressure));
    vs.mean_flow = mean_flow(result, v);
    for (double t : wall_shear_stress(s.flow, s.area, mu, delta)) vs.peak_wss = std::max(vs.peak_wss, std::abs(t));
    vs.wave_speed = reference_speed(network, v, s.x);
    report.vessels.push_back(vs);
  }

  const int aortic = options.aortic_vessel != 0 ? options.aortic_vessel : network.root_id();
  if (!network.contains(aortic)) throw ValidationError(fmt::format("analysis: unknown aortic vessel {}", aortic));
  const Vessel& av = network.vessel(aortic);
  report.aortic_mmhg = to_mmhg(pressure_stats(result.station(aortic, 0.5 * av.length).pressure));
  if (options.brachial_vessel != 0) {
    if (!network.contains(options.brachial_vessel)) {
      throw ValidationError(fmt::format("analysis: unknown brachial vessel {}", options.brachial_vessel));
    }
    const Vessel& bv = network.vessel(options.brachial_vessel);
    report.brachial_mmhg = to_mmhg(pressure_stats(result.station(bv.id, 0.5 * bv.length).pressure));
    report.has_brachial = true;
  }

  const double dt = result.time.size() > 1 ? result.time[1] - result.time[0] : result.period;
  for (int id : options.wia_vessels) {
    if (!network.contains(id)) throw ValidationError(fmt::format("analysis: unknown WIA vessel {}", id));
    const Vessel& v = network.vessel(id);
    const StationSeries& s = result.station(id, 0.5 * v.length);
    WiaSummary w;
    w.vessel_id = id;
    w.wia = wia_decompose(s.pressure, s.flow, s.area, network.fluid().rho, reference_speed(network, v, s.x), dt);
    try {
      w.reflection = reflection_coefficient(w.wia);
      w.reflection_defined = true;
    } catch (const NumericalError&) {
      w.reflection_defined = false;
    }
    w.wss = wall_shear_stress(s.flow, s.area, mu, delta);
    for (double t : w.wss) report.peak_aortic_wss = std::max(report.peak_aortic_wss, std::abs(t));
    report.wia.push_back(std::move(w));
  }
  report.regions = flow_fractions(result, network, options.regions, aortic);
  return report;
}

namespace {

nlohmann::ordered_json stats_json(const PressureStats& s) {
  return {{"systolic", s.systolic}, {"diastolic", s.diastolic}, {"pulse", s.pulse}};
}

}  // namespace

std::string report_json(const AnalysisReport& report) {
  nlohmann::ordered_json j;
  j["period_s"] = report.period;
  j["heart_rate_bpm"] = report.heart_rate;
  j["mean_inflow_mls"] = report.mean_inflow;
  j["mean_inflow_lmin"] = report.mean_inflow / kLitrePerMinute;
  j["reference_pressure_mmhg"] = report.reference_pressure_mmhg;
  j["aortic_pressure_mmhg"] = stats_json(report.aortic_mmhg);
  if (report.has_brachial) j["brachial_pressure_mmhg"] = stats_json(report.brachial_mmhg);
  j["peak_aortic_wss"] = report.peak_aortic_wss;
  auto& regions = j["flow_fractions"] = nlohmann::ordered_json::array();
  for (const auto& r : report.regions) {
    regions.push_back({{"region", r.name}, {"mean_flow_mls", r.mean_flow}, {"fraction", r.fraction}});
  }
  auto& wia = j["wave_intensity"] = nlohmann::ordered_json::array();
  for (const auto& w : report.wia) {
    nlohmann::ordered_json e{{"vessel", w.vessel_id}, {"rho_c", w.wia.rho_c}};
    e["reflection_coefficient"] = w.reflection_defined ? nlohmann::ordered_json(w.reflection) : nullptr;
    double wss_max = 0.0;
    for (double t : w.wss) wss_max = std::max(wss_max, std::abs(t));
    e["peak_wss"] = wss_max;
    auto& segs = e["segments"] = nlohmann::ordered_json::array();
    for (const auto& s : w.wia.segments) {
      segs.push_back({{"class", to_string(s.kind)},
                      {"t_begin_s", s.begin * w.wia.dt},
                      {"t_end_s", s.end * w.wia.dt},
                      {"peak_intensity", s.peak_intensity}});
    }
    wia.push_back(std::move(e));
  }
  auto& vessels = j["vessels"] = nlohmann::ordered_json::array();
  for (const auto& v : report.vessels) {
    vessels.push_back({{"id", v.id},
                       {"name", v.name},
                       {"pressure_mmhg", stats_json(v.pressure_mmhg)},
                       {"mean_flow_mls", v.mean_flow},
                       {"peak_wss", v.peak_wss},
                       {"wave_speed_cms", v.wave_speed}});
  }
  return j.dump(2) + "\n";
}

void write_wia_csv(const WiaSummary& summary, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError(fmt::format("cannot write {}", path.string()));
  const WiaResult& w = summary.wia;
  out << "t_s,dp_plus_dt,dp_minus_dt,du_plus_dt,du_minus_dt,wi_plus,wi_minus,p_plus,p_minus,u_plus,u_minus,wss\n";
  for (std::size_t i = 0; i < w.size(); ++i) {
    out << fmt::format("{},{},{},{},{},{},{},{},{},{},{},{}\n", i * w.dt, w.dp_plus_dt[i], w.dp_minus_dt[i],
                       w.du_plus_dt[i], w.du_minus_dt[i], w.wi_plus[i], w.wi_minus[i], w.p_plus[i], w.p_minus[i],
                       w.u_plus[i], w.u_minus[i], i < summary.wss.size() ? summary.wss[i] : 0.0);
  }
}

}  // namespace hemo1d

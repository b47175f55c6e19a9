#include "hemo1d/config.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "hemo1d/units.hpp"

namespace hemo1d {

using json = nlohmann::json;

namespace {

std::string read_file(const std::filesystem::path& path, const char* what) {
  std::ifstream in(path);
  if (!in) throw ValidationError(fmt::format("cannot open {} '{}'", what, path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json parse_json(const std::string& text, const char* what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(fmt::format("{} is not valid JSON: {}", what, e.what()));
  }
}

// A JSON object with its path, rejecting keys that are never read.
class Node {
 public:
  Node(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ParseError(fmt::format("{}: expected an object", path_));
  }

  bool has(const char* key) const {
    used_.insert(key);
    return j_.contains(key) && !j_.at(key).is_null();
  }

  template <typename T>
  T get(const char* key) const {
    used_.insert(key);
    if (!has(key)) throw ParseError(fmt::format("{}.{}: required field is missing", path_, key));
    try {
      return j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ParseError(fmt::format("{}.{}: wrong type ({})", path_, key, j_.at(key).type_name()));
    }
  }

  template <typename T>
  T get_or(const char* key, T fallback) const {
    used_.insert(key);
    return has(key) ? get<T>(key) : fallback;
  }

  Node child(const char* key) const {
    used_.insert(key);
    if (!has(key)) throw ParseError(fmt::format("{}.{}: required field is missing", path_, key));
    return Node(j_.at(key), path_ + "." + key);
  }

  const json& raw(const char* key) const {
    used_.insert(key);
    return j_.at(key);
  }

  std::string where(const std::string& key) const { return path_ + "." + key; }

  void finish() const {
    for (const auto& item : j_.items()) {
      if (!used_.count(item.key())) throw ParseError(fmt::format("{}.{}: unknown field", path_, item.key()));
    }
  }

 private:
  const json& j_;
  std::string path_;
  mutable std::set<std::string> used_;
};

double positive(double v, const std::string& where) {
  if (!(v > 0.0) || !std::isfinite(v)) throw ValidationError(fmt::format("{}: must be positive (got {})", where, v));
  return v;
}

int at_least(int v, int lo, const std::string& where) {
  if (v < lo) throw ValidationError(fmt::format("{}: must be >= {} (got {})", where, lo, v));
  return v;
}

std::vector<int> id_list(const json& j, const std::string& where) {
  if (!j.is_array()) throw ParseError(fmt::format("{}: expected an array of vessel ids", where));
  std::vector<int> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number_integer()) throw ParseError(fmt::format("{}[{}]: expected an integer vessel id", where, i));
    out.push_back(j[i].get<int>());
  }
  return out;
}

StiffnessConvention parse_convention(const std::string& s, const std::string& where) {
  if (s == "decaying") return StiffnessConvention::kDecaying;
  if (s == "literal") return StiffnessConvention::kLiteral;
  throw ValidationError(fmt::format("{}: expected 'decaying' or 'literal' (got '{}')", where, s));
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  if (path.is_relative() && !base.empty()) path = base / path;
  return path.lexically_normal();
}

void parse_reference(const json& j, RunConfig& cfg) {
  if (j.is_number()) {
    cfg.reference.mode = ReferencePressure::Mode::kFixed;
    cfg.reference.mmhg = j.get<double>();
    return;
  }
  Node n(j, "$.reference_pressure");
  const auto mode = n.get<std::string>("mode");
  if (mode == "fixed") {
    cfg.reference.mode = ReferencePressure::Mode::kFixed;
    cfg.reference.mmhg = n.get<double>("mmhg");
  } else if (mode == "cuff_mean") {
    cfg.reference.mode = ReferencePressure::Mode::kCuffMean;
    cfg.reference.vessel = n.get<int>("vessel");
    cfg.reference.systolic_mmhg = n.get<double>("systolic_mmhg");
    cfg.reference.diastolic_mmhg = n.get<double>("diastolic_mmhg");
    if (!(cfg.reference.systolic_mmhg >= cfg.reference.diastolic_mmhg)) {
      throw ValidationError("$.reference_pressure: systolic must be >= diastolic");
    }
  } else {
    throw ValidationError(fmt::format("$.reference_pressure.mode: expected 'fixed' or 'cuff_mean' (got '{}')", mode));
  }
  n.finish();
}

}  // namespace

RunConfig parse_config(const std::filesystem::path& path) {
  RunConfig cfg = parse_config_text(read_file(path, "config file"), path.parent_path());
  cfg.source = path;
  return cfg;
}

RunConfig parse_config_text(const std::string& json_text, const std::filesystem::path& base_dir) {
  const json doc = parse_json(json_text, "config file");
  Node root(doc, "$");
  RunConfig cfg;
  cfg.network = resolve(base_dir, root.get<std::string>("network"));
  cfg.inflow = resolve(base_dir, root.get<std::string>("inflow"));
  if (root.has("measured_flows")) cfg.measured_flows = resolve(base_dir, root.get<std::string>("measured_flows"));
  cfg.posture = parse_posture(root.get_or<std::string>("posture", "supine"));
  if (root.has("exercise")) {
    Node e = root.child("exercise");
    cfg.exercise = e.get_or<bool>("enabled", false);
    cfg.flow_factor = positive(e.get_or<double>("flow_factor", 2.0), e.where("flow_factor"));
    cfg.period_factor = positive(e.get_or<double>("period_factor", 0.6), e.where("period_factor"));
    e.finish();
  }
  if (root.has("reference_pressure")) parse_reference(root.raw("reference_pressure"), cfg);
  if (root.has("fluid")) {
    Node f = root.child("fluid");
    FluidParams fluid;
    fluid.rho = positive(f.get_or<double>("rho", fluid.rho), f.where("rho"));
    fluid.mu = positive(f.get_or<double>("mu", fluid.mu), f.where("mu"));
    fluid.g = f.get_or<double>("g", fluid.g);
    f.finish();
    cfg.fluid = fluid;
  }
  if (root.has("stiffness")) {
    Node s = root.child("stiffness");
    StiffnessParams k;
    k.k1 = s.get_or<double>("k1", k.k1);
    k.k2 = s.get_or<double>("k2", k.k2);
    k.k3 = positive(s.get_or<double>("k3", k.k3), s.where("k3"));
    if (s.has("convention")) k.convention = parse_convention(s.get<std::string>("convention"), s.where("convention"));
    s.finish();
    cfg.stiffness = k;
  }
  if (root.has("structured_tree")) {
    Node t = root.child("structured_tree");
    TreeDefaults& d = cfg.tree;
    d.alpha = t.get_or<double>("alpha", d.alpha);
    d.beta = t.get_or<double>("beta", d.beta);
    d.r_min = positive(t.get_or<double>("r_min", d.r_min), t.where("r_min"));
    d.lrr = positive(t.get_or<double>("lrr", d.lrr), t.where("lrr"));
    d.max_generations = at_least(t.get_or<int>("max_generations", d.max_generations), 1, t.where("max_generations"));
    d.spectrum.exact_harmonics =
        at_least(t.get_or<int>("exact_harmonics", d.spectrum.exact_harmonics), 0, t.where("exact_harmonics"));
    d.spectrum.high_band_stride =
        at_least(t.get_or<int>("high_band_stride", d.spectrum.high_band_stride), 1, t.where("high_band_stride"));
    t.finish();
    if (!(0.0 < d.beta && d.beta <= d.alpha && d.alpha < 1.0)) {
      throw ValidationError("$.structured_tree: need 0 < beta <= alpha < 1");
    }
  }
  if (root.has("overrides")) {
    const json& list = root.raw("overrides");
    if (!list.is_array()) throw ParseError("$.overrides: expected an array");
    for (std::size_t i = 0; i < list.size(); ++i) {
      Node o(list[i], fmt::format("$.overrides[{}]", i));
      ParameterOverride po;
      po.vessels = id_list(o.raw("vessels"), o.where("vessels"));
      if (po.vessels.empty()) throw ValidationError(fmt::format("{}: empty vessel list", o.where("vessels")));
      if (o.has("k3")) po.k3 = positive(o.get<double>("k3"), o.where("k3"));
      if (o.has("r_min")) po.r_min = positive(o.get<double>("r_min"), o.where("r_min"));
      if (!po.k3 && !po.r_min) throw ValidationError(fmt::format("$.overrides[{}]: needs k3 and/or r_min", i));
      o.finish();
      cfg.overrides.push_back(std::move(po));
    }
  }
  if (root.has("grid")) {
    Node g = root.child("grid");
    GridConfig& grid = cfg.grid;
    grid.dx = positive(g.get_or<double>("dx_cm", grid.dx), g.where("dx_cm"));
    grid.min_points = g.get_or<int>("min_points", grid.min_points);
    grid.cfl_safety = g.get_or<double>("cfl_safety", grid.cfl_safety);
    grid.samples_per_period = g.get_or<int>("samples_per_period", grid.samples_per_period);
    grid.min_samples = g.get_or<int>("min_samples", grid.min_samples);
    grid.max_cycles = g.get_or<int>("max_cycles", grid.max_cycles);
    grid.min_cycles = g.get_or<int>("min_cycles", grid.min_cycles);
    grid.periodicity_tolerance = g.get_or<double>("periodicity_tolerance", grid.periodicity_tolerance);
    grid.output_samples = g.get_or<int>("output_samples", grid.output_samples);
    grid.workers = g.get_or<int>("workers", grid.workers);
    grid.convolution_block = g.get_or<int>("convolution_block", grid.convolution_block);
    g.finish();
    try {
      grid.validate();
    } catch (const ValidationError& e) {
      throw ValidationError(fmt::format("$.grid: {}", e.what()));
    }
  }
  if (root.has("analysis")) {
    Node a = root.child("analysis");
    AnalysisOptions& opt = cfg.analysis;
    if (a.has("wia_vessels")) opt.wia_vessels = id_list(a.raw("wia_vessels"), a.where("wia_vessels"));
    opt.aortic_vessel = a.get_or<int>("aortic_vessel", 0);
    opt.brachial_vessel = a.get_or<int>("brachial_vessel", 0);
    if (a.has("regions")) {
      const json& regions = a.raw("regions");
      if (!regions.is_object()) throw ParseError("$.analysis.regions: expected an object of id lists");
      for (const auto& item : regions.items()) {
        opt.regions.push_back({item.key(), id_list(item.value(), a.where("regions." + item.key()))});
      }
    }
    a.finish();
  }
  cfg.output = resolve(base_dir, root.get_or<std::string>("output", "out"));
  root.finish();
  return cfg;
}

void validate_config(const RunConfig& config) {
  for (const auto& [path, what] : {std::pair{config.network, "network"}, std::pair{config.inflow, "inflow"}}) {
    if (!std::filesystem::exists(path)) throw ValidationError(fmt::format("{} file '{}' does not exist", what, path.string()));
  }
  if (config.measured_flows && !std::filesystem::exists(*config.measured_flows)) {
    throw ValidationError(fmt::format("measured flows file '{}' does not exist", config.measured_flows->string()));
  }
  (void)configured_network(config);
}

VesselNetwork configured_network(const RunConfig& config) {
  VesselNetwork net = load_network(config.network);
  if (config.fluid) net = net.with_fluid(*config.fluid);
  if (config.stiffness) net = net.with_stiffness(*config.stiffness);
  if (config.reference.mode == ReferencePressure::Mode::kFixed) net = net.with_p0(from_mmhg(config.reference.mmhg));
  auto check = [&](int id, const std::string& where) {
    if (!net.contains(id)) throw ValidationError(fmt::format("{}: vessel {} is not in the network", where, id));
  };
  for (std::size_t i = 0; i < config.overrides.size(); ++i) {
    const ParameterOverride& o = config.overrides[i];
    for (int id : o.vessels) {
      check(id, fmt::format("$.overrides[{}].vessels", i));
      VesselOverrides vo;
      vo.k3 = o.k3;
      vo.r_min = o.r_min;
      net = net.with_overrides(id, vo);
    }
  }
  const AnalysisOptions& a = config.analysis;
  for (int id : a.wia_vessels) check(id, "$.analysis.wia_vessels");
  if (a.aortic_vessel != 0) check(a.aortic_vessel, "$.analysis.aortic_vessel");
  if (a.brachial_vessel != 0) check(a.brachial_vessel, "$.analysis.brachial_vessel");
  for (const auto& r : a.regions) {
    for (int id : r.vessel_ids) check(id, "$.analysis.regions." + r.name);
  }
  if (config.reference.mode == ReferencePressure::Mode::kCuffMean) check(config.reference.vessel, "$.reference_pressure.vessel");
  return net;
}

StructuredTreeSpec tree_spec_for(const RunConfig& config, const VesselNetwork& network, int vessel_id) {
  const Vessel& v = network.vessel(vessel_id);
  StructuredTreeSpec spec;
  spec.root_radius = v.r_out;
  spec.alpha = config.tree.alpha;
  spec.beta = config.tree.beta;
  spec.r_min = v.overrides.r_min.value_or(config.tree.r_min);
  spec.lrr = config.tree.lrr;
  spec.max_generations = config.tree.max_generations;
  spec.fluid = network.fluid();
  spec.stiffness = network.stiffness();
  return spec;
}

std::string config_json(const RunConfig& c) {
  nlohmann::ordered_json j;
  j["network"] = c.network.generic_string();
  j["inflow"] = c.inflow.generic_string();
  if (c.measured_flows) j["measured_flows"] = c.measured_flows->generic_string();
  j["posture"] = to_string(c.posture);
  j["exercise"] = {{"enabled", c.exercise}, {"flow_factor", c.flow_factor}, {"period_factor", c.period_factor}};
  if (c.reference.mode == ReferencePressure::Mode::kFixed) {
    j["reference_pressure"] = {{"mode", "fixed"}, {"mmhg", c.reference.mmhg}};
  } else {
    j["reference_pressure"] = {{"mode", "cuff_mean"},
                               {"vessel", c.reference.vessel},
                               {"systolic_mmhg", c.reference.systolic_mmhg},
                               {"diastolic_mmhg", c.reference.diastolic_mmhg}};
  }
  if (c.fluid) j["fluid"] = {{"rho", c.fluid->rho}, {"mu", c.fluid->mu}, {"g", c.fluid->g}};
  if (c.stiffness) {
    j["stiffness"] = {{"k1", c.stiffness->k1},
                      {"k2", c.stiffness->k2},
                      {"k3", c.stiffness->k3},
                      {"convention", c.stiffness->convention == StiffnessConvention::kDecaying ? "decaying" : "literal"}};
  }
  j["structured_tree"] = {{"alpha", c.tree.alpha},
                          {"beta", c.tree.beta},
                          {"r_min", c.tree.r_min},
                          {"lrr", c.tree.lrr},
                          {"max_generations", c.tree.max_generations},
                          {"exact_harmonics", c.tree.spectrum.exact_harmonics},
                          {"high_band_stride", c.tree.spectrum.high_band_stride}};
  auto& overrides = j["overrides"] = nlohmann::ordered_json::array();
  for (const auto& o : c.overrides) {
    nlohmann::ordered_json e{{"vessels", o.vessels}};
    if (o.k3) e["k3"] = *o.k3;
    if (o.r_min) e["r_min"] = *o.r_min;
    overrides.push_back(std::move(e));
  }
  const GridConfig& g = c.grid;
  // Worker count is left out: it must not change any result.
  j["grid"] = {{"dx_cm", g.dx},
               {"min_points", g.min_points},
               {"cfl_safety", g.cfl_safety},
               {"samples_per_period", g.samples_per_period},
               {"min_samples", g.min_samples},
               {"max_cycles", g.max_cycles},
               {"min_cycles", g.min_cycles},
               {"periodicity_tolerance", g.periodicity_tolerance},
               {"output_samples", g.output_samples},
               {"convolution_block", g.convolution_block}};
  nlohmann::ordered_json regions = nlohmann::ordered_json::object();
  for (const auto& r : c.analysis.regions) regions[r.name] = r.vessel_ids;
  j["analysis"] = {{"wia_vessels", c.analysis.wia_vessels},
                   {"aortic_vessel", c.analysis.aortic_vessel},
                   {"brachial_vessel", c.analysis.brachial_vessel},
                   {"regions", regions}};
  return j.dump(2);
}

// ---------------------------------------------------------------------------
// Measured flows
// ---------------------------------------------------------------------------

MeasuredFlowSet load_measured_flows(const std::filesystem::path& path) {
  return parse_measured_flows(read_file(path, "measured flows file"));
}

MeasuredFlowSet parse_measured_flows(const std::string& json_text) {
  const json doc = parse_json(json_text, "measured flows file");
  Node root(doc, "$");
  MeasuredFlowSet set;
  if (root.has("inflow_lmin")) set.inflow_lmin = root.get<double>("inflow_lmin");
  const json& planes = root.raw("planes");
  if (!planes.is_array()) throw ParseError("$.planes: expected an array");
  std::set<std::string> names;
  for (std::size_t i = 0; i < planes.size(); ++i) {
    Node p(planes[i], fmt::format("$.planes[{}]", i));
    FlowPlane plane;
    plane.name = p.get<std::string>("name");
    plane.mean_lmin = p.get<double>("mean_lmin");
    if (!(plane.mean_lmin >= 0.0)) throw ValidationError(fmt::format("{}: flows must be >= 0", p.where("mean_lmin")));
    if (p.has("parent")) plane.parent = p.get<std::string>("parent");
    const auto role = p.get_or<std::string>("role", "branch");
    if (role == "trunk") {
      plane.role = PlaneRole::kTrunk;
    } else if (role == "branch") {
      plane.role = PlaneRole::kBranch;
    } else {
      throw ValidationError(fmt::format("{}: expected 'trunk' or 'branch' (got '{}')", p.where("role"), role));
    }
    if (p.has("target_lmin")) plane.target_lmin = p.get<double>("target_lmin");
    p.finish();
    if (!names.insert(plane.name).second) throw ValidationError(fmt::format("duplicate plane name '{}'", plane.name));
    set.planes.push_back(std::move(plane));
  }
  root.finish();
  if (set.inflow_lmin && !(*set.inflow_lmin >= 0.0)) throw ValidationError("$.inflow_lmin: flows must be >= 0");
  return set;
}

FlowScaling scale_measured_flows(const MeasuredFlowSet& set) {
  const std::size_t n = set.planes.size();
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < n; ++i) index[set.planes[i].name] = i;
  std::vector<std::vector<std::size_t>> children(n);
  std::vector<std::size_t> roots;
  for (std::size_t i = 0; i < n; ++i) {
    const FlowPlane& p = set.planes[i];
    if (!p.parent) {
      roots.push_back(i);
      continue;
    }
    auto it = index.find(*p.parent);
    if (it == index.end()) throw ValidationError(fmt::format("plane '{}': unknown parent '{}'", p.name, *p.parent));
    children[it->second].push_back(i);
  }
  if (n > 0 && roots.empty()) throw ValidationError("measured flows: parent relations contain a cycle");
  if (set.inflow_lmin && roots.size() != 1) throw ValidationError("measured flows: inflow_lmin needs exactly one root plane");

  std::vector<double> scaled(n, 0.0);
  std::vector<bool> done(n, false);
  std::vector<std::size_t> order;
  std::function<void(std::size_t)> visit = [&](std::size_t i) {
    order.push_back(i);
    done[i] = true;
    const double parent = scaled[i];
    std::vector<std::size_t> trunks, branches;
    for (std::size_t c : children[i]) (set.planes[c].role == PlaneRole::kTrunk ? trunks : branches).push_back(c);
    if (trunks.size() > 1) {
      throw ValidationError(fmt::format("plane '{}' has more than one continuing trunk", set.planes[i].name));
    }
    double trunk = 0.0;
    if (!trunks.empty()) {
      const FlowPlane& t = set.planes[trunks[0]];
      if (t.target_lmin) {
        trunk = *t.target_lmin;
      } else if (branches.empty()) {
        trunk = parent;
      } else {
        trunk = std::min(t.mean_lmin, parent);
      }
      scaled[trunks[0]] = trunk;
    }
    if (!branches.empty()) {
      const double remainder = parent - trunk;
      if (remainder < 0.0) {
        throw ValidationError(fmt::format("plane '{}': trunk {} L/min exceeds the parent's {} L/min", set.planes[i].name,
                                          trunk, parent));
      }
      double measured = 0.0;
      for (std::size_t b : branches) measured += set.planes[b].mean_lmin;
      if (measured == 0.0 && remainder > 0.0) {
        throw ValidationError(fmt::format("plane '{}': branches measure zero flow but must carry {} L/min",
                                          set.planes[i].name, remainder));
      }
      const double factor = measured > 0.0 ? remainder / measured : 1.0;
      double assigned = 0.0;
      for (std::size_t k = 0; k < branches.size(); ++k) {
        const std::size_t b = branches[k];
        // The last branch takes the exact remainder so the junction closes to rounding.
        scaled[b] = (k + 1 == branches.size()) ? remainder - assigned : set.planes[b].mean_lmin * factor;
        assigned += scaled[b];
      }
    }
    for (std::size_t c : children[i]) visit(c);
  };
  for (std::size_t r : roots) {
    const FlowPlane& p = set.planes[r];
    scaled[r] = set.inflow_lmin ? *set.inflow_lmin : p.target_lmin.value_or(p.mean_lmin);
    visit(r);
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!done[i]) throw ValidationError(fmt::format("plane '{}' is part of a parent cycle", set.planes[i].name));
  }

  FlowScaling out;
  out.scaled = set;
  for (std::size_t i = 0; i < n; ++i) {
    const FlowPlane& p = set.planes[i];
    out.scaled.planes[i].mean_lmin = scaled[i];
    out.scaled.planes[i].target_lmin.reset();
    out.planes.push_back({p.name, p.mean_lmin, scaled[i], p.mean_lmin > 0.0 ? scaled[i] / p.mean_lmin : 1.0});
    if (!children[i].empty()) {
      double sum = 0.0;
      for (std::size_t c : children[i]) sum += scaled[c];
      if (scaled[i] > 0.0) out.max_relative_residual = std::max(out.max_relative_residual, std::abs(scaled[i] - sum) / scaled[i]);
    }
  }
  return out;
}

}  // namespace hemo1d

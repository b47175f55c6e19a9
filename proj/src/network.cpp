#include "hemo1d/network.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "hemo1d/units.hpp"

namespace hemo1d {

using nlohmann::json;

namespace {

constexpr double kEndpointTolerance = 1e-3;  // cm
constexpr double kInletTolerance = 1e-9;     // cm

void require_positive(double value, const Vessel& v, const char* field) {
  if (!(value > 0.0) || !std::isfinite(value)) {
    throw ValidationError(fmt::format("vessel {} ('{}'): {} must be positive (got {})", v.id, v.name, field, value));
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Taper
// ---------------------------------------------------------------------------

double radius_at(const Taper& taper, double x) { return taper.n1 * std::exp(-taper.n2 * x) + taper.n3; }

double radius_at(const Vessel& vessel, double x) {
  if (x < 0.0 || x > vessel.length) {
    throw ValidationError(
        fmt::format("radius_at: x = {} outside [0, {}] for vessel {}", x, vessel.length, vessel.id));
  }
  return radius_at(vessel.taper, x);
}

Taper taper_through_endpoints(double r_in, double r_out, double length, double rate) {
  if (r_in == r_out) return {0.0, 0.0, r_in};
  if (!(rate > 0.0)) {
    // Linear limit is not representable; fall back to a steep decay that still hits both ends.
    rate = 1.0 / length;
  }
  const double decay = -std::expm1(-rate * length);  // 1 - exp(-n2 L)
  Taper t;
  t.n2 = rate;
  t.n1 = (r_in - r_out) / decay;
  t.n3 = r_in - t.n1;
  return t;
}

TaperFit fit_taper(std::span<const TaperSample> samples) {
  if (samples.size() < 3) {
    throw ValidationError(fmt::format("fit_taper: need at least 3 samples (got {})", samples.size()));
  }
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (!(samples[i].r > 0.0)) throw ValidationError("fit_taper: radii must be positive");
    if (i > 0 && !(samples[i].x > samples[i - 1].x)) throw ValidationError("fit_taper: x must be increasing");
  }

  const auto [rmin_it, rmax_it] =
      std::minmax_element(samples.begin(), samples.end(), [](auto& a, auto& b) { return a.r < b.r; });
  const double r_lo = rmin_it->r;
  const double r_hi = rmax_it->r;
  TaperFit fit;
  if (r_hi - r_lo <= 1e-12 * r_hi) {
    fit.taper = {0.0, 0.0, samples.front().r};
    fit.converged = true;
    return fit;
  }

  auto residual = [&](const Taper& t) {
    double s = 0.0;
    for (const auto& p : samples) {
      const double e = p.r - radius_at(t, p.x);
      s += e * e;
    }
    return s;
  };

  // Starting point: log-linear regression of (r - r_end) with a small offset so the
  // last sample stays inside the logarithm's domain.
  const double r_end = samples.back().r;
  const double offset = r_end - 0.1 * (r_hi - r_lo);
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  double count = 0;
  for (const auto& p : samples) {
    const double y = p.r - offset;
    if (y <= 0.0) continue;
    const double ly = std::log(y);
    sx += p.x;
    sy += ly;
    sxx += p.x * p.x;
    sxy += p.x * ly;
    count += 1.0;
  }
  Taper t{r_hi - r_lo, 0.0, offset};
  const double denom = count * sxx - sx * sx;
  if (count >= 2 && denom > 0.0) {
    const double slope = (count * sxy - sx * sy) / denom;
    const double intercept = (sy - slope * sx) / count;
    t.n2 = std::max(0.0, -slope);
    t.n1 = std::exp(intercept);
    t.n3 = offset;
  }

  double cost = residual(t);
  double lambda = 1e-3;
  constexpr int kMaxIterations = 500;
  for (int it = 0; it < kMaxIterations; ++it) {
    fit.iterations = it + 1;
    // Normal equations J^T J d = J^T e for parameters (n1, n2, n3).
    std::array<std::array<double, 3>, 3> jtj{};
    std::array<double, 3> jte{};
    for (const auto& p : samples) {
      const double ex = std::exp(-t.n2 * p.x);
      const std::array<double, 3> grad{ex, -t.n1 * p.x * ex, 1.0};
      const double e = p.r - (t.n1 * ex + t.n3);
      for (int a = 0; a < 3; ++a) {
        jte[a] += grad[a] * e;
        for (int b = 0; b < 3; ++b) jtj[a][b] += grad[a] * grad[b];
      }
    }

    bool accepted = false;
    Taper trial;
    double step_rel = 0.0;
    for (int attempt = 0; attempt < 40 && !accepted; ++attempt) {
      auto m = jtj;
      for (int a = 0; a < 3; ++a) m[a][a] += lambda * (jtj[a][a] > 0 ? jtj[a][a] : 1.0);
      // 3x3 solve by Cramer's rule.
      auto det3 = [](const std::array<std::array<double, 3>, 3>& q) {
        return q[0][0] * (q[1][1] * q[2][2] - q[1][2] * q[2][1]) - q[0][1] * (q[1][0] * q[2][2] - q[1][2] * q[2][0]) +
               q[0][2] * (q[1][0] * q[2][1] - q[1][1] * q[2][0]);
      };
      const double det = det3(m);
      if (det == 0.0 || !std::isfinite(det)) {
        lambda *= 10.0;
        continue;
      }
      std::array<double, 3> d{};
      for (int c = 0; c < 3; ++c) {
        auto mc = m;
        for (int r = 0; r < 3; ++r) mc[r][c] = jte[r];
        d[c] = det3(mc) / det;
      }
      trial = {std::max(0.0, t.n1 + d[0]), std::max(0.0, t.n2 + d[1]), t.n3 + d[2]};
      const double trial_cost = residual(trial);
      if (trial_cost <= cost) {
        step_rel = std::sqrt((trial.n1 - t.n1) * (trial.n1 - t.n1) + (trial.n2 - t.n2) * (trial.n2 - t.n2) +
                             (trial.n3 - t.n3) * (trial.n3 - t.n3)) /
                   std::max(1e-300, std::sqrt(t.n1 * t.n1 + t.n2 * t.n2 + t.n3 * t.n3));
        t = trial;
        cost = trial_cost;
        lambda = std::max(lambda * 0.3, 1e-15);
        accepted = true;
      } else {
        lambda *= 10.0;
      }
    }
    if (!accepted || step_rel < 1e-10) {
      fit.converged = true;
      break;
    }
  }
  fit.taper = t;
  fit.residual_norm = std::sqrt(cost);
  return fit;
}

// ---------------------------------------------------------------------------
// Allometry and gravity
// ---------------------------------------------------------------------------

double allometric_scale(double length, const PatientScaling& scaling) {
  if (!(length > 0.0)) throw ValidationError(fmt::format("allometric_scale: length must be positive (got {})", length));
  if (!(scaling.literature_weight > 0.0) || !(scaling.patient_weight > 0.0) || !(scaling.exponent > 0.0)) {
    throw ValidationError("allometric_scale: weights and exponent must be positive");
  }
  const double ratio = scaling.invert_ratio ? scaling.patient_weight / scaling.literature_weight
                                            : scaling.literature_weight / scaling.patient_weight;
  return length * std::pow(ratio, scaling.exponent);
}

double gravity_cosine(double theta) {
  if (theta == kPi / 2.0 || theta == -kPi / 2.0) return 0.0;
  if (theta == -kPi || theta == kPi) return -1.0;
  if (theta == 0.0) return 1.0;
  return std::cos(theta);
}

VesselNetwork assign_gravity_angles(const VesselNetwork& network, Posture posture) {
  VesselNetwork out = network;
  out.posture_ = posture;
  for (auto& v : out.vessels_) {
    if (posture == Posture::kSupine) {
      v.gravity_angle = kPi / 2.0;
      continue;
    }
    switch (v.orientation) {
      case Orientation::kUp: v.gravity_angle = -kPi; break;
      case Orientation::kDown: v.gravity_angle = 0.0; break;
      case Orientation::kHorizontal: v.gravity_angle = kPi / 2.0; break;
      case Orientation::kUnspecified:
        throw ValidationError(
            fmt::format("vessel {} ('{}') has no orientation label; required for upright posture", v.id, v.name));
    }
  }
  return out;
}

Orientation parse_orientation(const std::string& text) {
  if (text == "up") return Orientation::kUp;
  if (text == "down") return Orientation::kDown;
  if (text == "horizontal") return Orientation::kHorizontal;
  throw ParseError(fmt::format("unknown orientation '{}' (expected up, down or horizontal)", text));
}

std::string to_string(Orientation orientation) {
  switch (orientation) {
    case Orientation::kUp: return "up";
    case Orientation::kDown: return "down";
    case Orientation::kHorizontal: return "horizontal";
    case Orientation::kUnspecified: break;
  }
  return "";
}

Posture parse_posture(const std::string& text) {
  if (text == "supine") return Posture::kSupine;
  if (text == "upright") return Posture::kUpright;
  throw ParseError(fmt::format("unknown posture '{}' (expected supine or upright)", text));
}

std::string to_string(Posture posture) { return posture == Posture::kSupine ? "supine" : "upright"; }

// ---------------------------------------------------------------------------
// VesselNetwork
// ---------------------------------------------------------------------------

VesselNetwork VesselNetwork::build(std::vector<Vessel> vessels, FluidParams fluid, StiffnessParams stiffness,
                                   double p0, double taper_rate) {
  if (vessels.empty()) throw TopologyError("network has no vessels");
  if (!(fluid.rho > 0.0) || !(fluid.mu > 0.0)) {
    throw ValidationError(fmt::format("fluid: rho and mu must be positive (rho = {}, mu = {})", fluid.rho, fluid.mu));
  }
  if (!(taper_rate >= 0.0)) throw ValidationError("taper_n2 must be non-negative");

  VesselNetwork net;
  net.fluid_ = fluid;
  net.stiffness_ = stiffness;
  net.p0_ = p0;
  net.taper_rate_ = taper_rate;

  std::map<int, std::size_t> index;
  for (std::size_t i = 0; i < vessels.size(); ++i) {
    if (!index.emplace(vessels[i].id, i).second) {
      throw TopologyError(fmt::format("duplicate vessel id {}", vessels[i].id));
    }
  }

  std::optional<int> root;
  std::vector<std::vector<int>> daughters(vessels.size());
  for (const auto& v : vessels) {
    if (!v.parent) {
      if (root) throw TopologyError(fmt::format("multiple roots: vessels {} and {}", *root, v.id));
      root = v.id;
      continue;
    }
    auto it = index.find(*v.parent);
    if (it == index.end()) {
      throw TopologyError(fmt::format("vessel {} names unknown parent {}", v.id, *v.parent));
    }
    if (*v.parent == v.id) throw TopologyError(fmt::format("vessel {} is its own parent", v.id));
    daughters[it->second].push_back(v.id);
  }
  if (!root) throw TopologyError("network has no root (every vessel names a parent, so there is a cycle)");

  // Reachability from the root detects cycles disconnected from it.
  std::vector<bool> seen(vessels.size(), false);
  std::vector<int> stack{*root};
  std::size_t reached = 0;
  while (!stack.empty()) {
    const int id = stack.back();
    stack.pop_back();
    const std::size_t i = index.at(id);
    if (seen[i]) throw TopologyError(fmt::format("cycle through vessel {}", id));
    seen[i] = true;
    ++reached;
    for (int d : daughters[i]) stack.push_back(d);
  }
  if (reached != vessels.size()) {
    for (std::size_t i = 0; i < vessels.size(); ++i) {
      if (!seen[i]) {
        throw TopologyError(fmt::format("vessel {} is not reachable from root {} (orphan or cycle)", vessels[i].id, *root));
      }
    }
  }

  for (std::size_t i = 0; i < vessels.size(); ++i) {
    Vessel& v = vessels[i];
    require_positive(v.length, v, "length_cm");
    require_positive(v.r_in, v, "r_in_cm");
    require_positive(v.r_out, v, "r_out_cm");
    if (v.overrides.k3 && !(*v.overrides.k3 > 0.0)) {
      throw ValidationError(fmt::format("vessel {}: override k3 must be positive", v.id));
    }
    if (v.overrides.r_min && !(*v.overrides.r_min > 0.0)) {
      throw ValidationError(fmt::format("vessel {}: override r_min must be positive", v.id));
    }
    const bool leaf = daughters[i].empty();
    if (leaf && !v.terminal) {
      throw TopologyError(fmt::format("vessel {} ('{}') has no daughters but is not flagged terminal", v.id, v.name));
    }
    if (!leaf && v.terminal) {
      throw TopologyError(fmt::format("vessel {} ('{}') is flagged terminal but has daughters", v.id, v.name));
    }
    if (v.r_out > v.r_in) {
      net.warnings_.push_back(
          fmt::format("vessel {} ('{}'): expanding taper (r_out {} > r_in {})", v.id, v.name, v.r_out, v.r_in));
    }

    const bool explicit_taper = v.taper != Taper{};
    if (!explicit_taper) {
      v.taper = taper_through_endpoints(v.r_in, v.r_out, v.length, taper_rate);
    }
    if (std::abs(v.taper.n1 + v.taper.n3 - v.r_in) > kInletTolerance) {
      throw ValidationError(fmt::format("vessel {}: taper n1 + n3 = {} does not match r_in = {}", v.id,
                                        v.taper.n1 + v.taper.n3, v.r_in));
    }
    if (std::abs(radius_at(v.taper, v.length) - v.r_out) > kEndpointTolerance) {
      throw ValidationError(fmt::format("vessel {}: taper gives r(L) = {} but r_out = {}", v.id,
                                        radius_at(v.taper, v.length), v.r_out));
    }
    if (!(radius_at(v.taper, v.length) > 0.0)) {
      throw ValidationError(fmt::format("vessel {}: taper yields non-positive radius", v.id));
    }
  }

  net.root_id_ = *root;
  net.vessels_ = std::move(vessels);
  net.daughters_ = std::move(daughters);
  for (std::size_t i = 0; i < net.vessels_.size(); ++i) {
    if (!net.daughters_[i].empty()) net.junctions_.push_back({net.vessels_[i].id, net.daughters_[i]});
  }
  return net;
}

const Vessel& VesselNetwork::vessel(int id) const { return vessels_[index_of(id)]; }

std::size_t VesselNetwork::index_of(int id) const {
  for (std::size_t i = 0; i < vessels_.size(); ++i) {
    if (vessels_[i].id == id) return i;
  }
  throw ValidationError(fmt::format("unknown vessel id {}", id));
}

bool VesselNetwork::contains(int id) const {
  return std::any_of(vessels_.begin(), vessels_.end(), [id](const Vessel& v) { return v.id == id; });
}

std::span<const int> VesselNetwork::daughters(int id) const { return daughters_[index_of(id)]; }

std::vector<int> VesselNetwork::terminal_ids() const {
  std::vector<int> ids;
  for (const auto& v : vessels_) {
    if (v.terminal) ids.push_back(v.id);
  }
  return ids;
}

StiffnessParams VesselNetwork::stiffness_for(const Vessel& v) const {
  StiffnessParams p = stiffness_;
  if (v.overrides.k3) p.k3 = *v.overrides.k3;
  return p;
}

VesselNetwork VesselNetwork::with_fluid(FluidParams fluid) const {
  if (!(fluid.rho > 0.0) || !(fluid.mu > 0.0)) throw ValidationError("fluid: rho and mu must be positive");
  VesselNetwork out = *this;
  out.fluid_ = fluid;
  return out;
}

VesselNetwork VesselNetwork::with_stiffness(StiffnessParams stiffness) const {
  VesselNetwork out = *this;
  out.stiffness_ = stiffness;
  return out;
}

VesselNetwork VesselNetwork::with_p0(double p0) const {
  VesselNetwork out = *this;
  out.p0_ = p0;
  return out;
}

VesselNetwork VesselNetwork::with_overrides(int id, VesselOverrides overrides) const {
  VesselNetwork out = *this;
  Vessel& v = out.vessels_[index_of(id)];
  if (overrides.k3) {
    if (!(*overrides.k3 > 0.0)) throw ValidationError(fmt::format("vessel {}: override k3 must be positive", id));
    v.overrides.k3 = overrides.k3;
  }
  if (overrides.r_min) {
    if (!(*overrides.r_min > 0.0)) throw ValidationError(fmt::format("vessel {}: override r_min must be positive", id));
    v.overrides.r_min = overrides.r_min;
  }
  return out;
}

bool VesselNetwork::operator==(const VesselNetwork& other) const {
  return vessels_ == other.vessels_ && junctions_ == other.junctions_ && fluid_ == other.fluid_ &&
         stiffness_ == other.stiffness_ && p0_ == other.p0_ && taper_rate_ == other.taper_rate_ &&
         posture_ == other.posture_ && root_id_ == other.root_id_;
}

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

namespace {

template <typename T>
T get_field(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw ParseError(fmt::format("{}: missing field '{}'", where, key));
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ParseError(fmt::format("{}.{}: {}", where, key, e.what()));
  }
}

template <typename T>
T get_or(const json& j, const char* key, T fallback, const std::string& where) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  return get_field<T>(j, key, where);
}

}  // namespace

VesselNetwork parse_network(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ParseError(fmt::format("network file is not valid JSON: {}", e.what()));
  }
  if (!doc.is_object()) throw ParseError("network file: top level must be an object");

  FluidParams fluid;
  if (doc.contains("fluid")) {
    const json& f = doc["fluid"];
    fluid.rho = get_or(f, "rho", fluid.rho, "fluid");
    fluid.mu = get_or(f, "mu", fluid.mu, "fluid");
    fluid.g = get_or(f, "g", fluid.g, "fluid");
  }
  StiffnessParams stiffness;
  double p0 = 0.0;
  if (doc.contains("stiffness")) {
    const json& s = doc["stiffness"];
    stiffness.k1 = get_or(s, "k1", stiffness.k1, "stiffness");
    stiffness.k2 = get_or(s, "k2", stiffness.k2, "stiffness");
    stiffness.k3 = get_or(s, "k3", stiffness.k3, "stiffness");
    p0 = get_or(s, "p0", 0.0, "stiffness");
    const auto conv = get_or<std::string>(s, "convention", "decaying", "stiffness");
    if (conv == "decaying") {
      stiffness.convention = StiffnessConvention::kDecaying;
    } else if (conv == "literal") {
      stiffness.convention = StiffnessConvention::kLiteral;
    } else {
      throw ParseError(fmt::format("stiffness.convention: unknown value '{}'", conv));
    }
  }
  const double taper_rate = get_or(doc, "taper_n2", VesselNetwork::kDefaultTaperRate, "network");

  if (!doc.contains("vessels") || !doc["vessels"].is_array()) throw ParseError("network file: missing 'vessels' array");
  std::vector<Vessel> vessels;
  for (std::size_t i = 0; i < doc["vessels"].size(); ++i) {
    const json& jv = doc["vessels"][i];
    const std::string where = fmt::format("vessels[{}]", i);
    if (!jv.is_object()) throw ParseError(where + ": expected an object");
    Vessel v;
    v.id = get_field<int>(jv, "id", where);
    v.name = get_or<std::string>(jv, "name", "", where);
    v.length = get_field<double>(jv, "length_cm", where);
    v.r_in = get_field<double>(jv, "r_in_cm", where);
    v.r_out = get_field<double>(jv, "r_out_cm", where);
    if (!jv.contains("parent")) throw ParseError(where + ": missing field 'parent' (use null for the root)");
    if (!jv["parent"].is_null()) v.parent = get_field<int>(jv, "parent", where);
    if (jv.contains("orientation") && !jv["orientation"].is_null()) {
      v.orientation = parse_orientation(jv["orientation"].get<std::string>());
    }
    v.terminal = get_field<bool>(jv, "terminal", where);
    if (jv.contains("overrides") && !jv["overrides"].is_null()) {
      const json& o = jv["overrides"];
      if (o.contains("k3") && !o["k3"].is_null()) v.overrides.k3 = get_field<double>(o, "k3", where + ".overrides");
      if (o.contains("r_min") && !o["r_min"].is_null()) {
        v.overrides.r_min = get_field<double>(o, "r_min", where + ".overrides");
      }
    }
    if (jv.contains("taper") && !jv["taper"].is_null()) {
      const json& t = jv["taper"];
      v.taper = {get_field<double>(t, "n1", where + ".taper"), get_field<double>(t, "n2", where + ".taper"),
                 get_field<double>(t, "n3", where + ".taper")};
    }
    vessels.push_back(std::move(v));
  }
  return VesselNetwork::build(std::move(vessels), fluid, stiffness, p0, taper_rate);
}

VesselNetwork load_network(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(fmt::format("cannot open network file '{}'", path.string()));
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_network(buffer.str());
}

std::string serialize_network(const VesselNetwork& network) {
  json doc;
  doc["fluid"] = {{"rho", network.fluid().rho}, {"mu", network.fluid().mu}, {"g", network.fluid().g}};
  const auto& s = network.stiffness();
  doc["stiffness"] = {{"k1", s.k1},
                      {"k2", s.k2},
                      {"k3", s.k3},
                      {"p0", network.p0()},
                      {"convention", s.convention == StiffnessConvention::kDecaying ? "decaying" : "literal"}};
  doc["taper_n2"] = network.taper_rate();
  json arr = json::array();
  for (const auto& v : network.vessels()) {
    json jv;
    jv["id"] = v.id;
    jv["name"] = v.name;
    jv["length_cm"] = v.length;
    jv["r_in_cm"] = v.r_in;
    jv["r_out_cm"] = v.r_out;
    jv["parent"] = v.parent ? json(*v.parent) : json(nullptr);
    if (v.orientation != Orientation::kUnspecified) jv["orientation"] = to_string(v.orientation);
    jv["terminal"] = v.terminal;
    json o = json::object();
    if (v.overrides.k3) o["k3"] = *v.overrides.k3;
    if (v.overrides.r_min) o["r_min"] = *v.overrides.r_min;
    jv["overrides"] = o;
    jv["taper"] = {{"n1", v.taper.n1}, {"n2", v.taper.n2}, {"n3", v.taper.n3}};
    arr.push_back(std::move(jv));
  }
  doc["vessels"] = std::move(arr);
  return doc.dump(2);
}

}  // namespace hemo1d

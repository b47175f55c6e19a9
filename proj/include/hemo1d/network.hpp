#pragma once

#include <cstddef>
#include <filesystem>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hemo1d/wall.hpp"

namespace hemo1d {

enum class Posture { kSupine, kUpright };

/// Direction of blood flow relative to gravity when the patient stands.
enum class Orientation { kUnspecified, kUp, kDown, kHorizontal };

/// Radius profile r(x) = n1 exp(-n2 x) + n3.
struct Taper {
  double n1 = 0.0;  // cm
  double n2 = 0.0;  // 1/cm
  double n3 = 0.0;  // cm
  bool operator==(const Taper&) const = default;
};

struct VesselOverrides {
  std::optional<double> k3;     // g/cm/s^2
  std::optional<double> r_min;  // cm, structured-tree cutoff
  bool operator==(const VesselOverrides&) const = default;
};

struct Vessel {
  int id = 0;
  std::string name;
  double length = 0.0;  // cm
  double r_in = 0.0;    // cm
  double r_out = 0.0;   // cm
  std::optional<int> parent;
  Orientation orientation = Orientation::kUnspecified;
  bool terminal = false;
  VesselOverrides overrides;
  Taper taper;
  double gravity_angle = std::numbers::pi / 2.0;  // theta, radians; pi/2 means no gravity

  bool operator==(const Vessel&) const = default;
};

struct Junction {
  int parent = 0;
  std::vector<int> daughters;
  bool operator==(const Junction&) const = default;
};

struct FluidParams {
  double rho = 1.057;  // g/cm^3
  double mu = 0.032;   // g/cm/s
  double g = 981.0;    // cm/s^2
  double nu() const { return mu / rho; }
  bool operator==(const FluidParams&) const = default;
};

/// Rooted tree of tapered elastic vessels. Immutable once built.
class VesselNetwork {
 public:
  VesselNetwork() = default;

  /// Validates topology and values, derives junctions and the root, and fills
  /// in taper coefficients for vessels that do not carry explicit ones.
  /// Throws TopologyError / ValidationError.
  static VesselNetwork build(std::vector<Vessel> vessels, FluidParams fluid, StiffnessParams stiffness,
                             double p0 = 0.0, double taper_rate = kDefaultTaperRate);

  static constexpr double kDefaultTaperRate = 0.10;  // 1/cm

  const std::vector<Vessel>& vessels() const { return vessels_; }
  const std::vector<Junction>& junctions() const { return junctions_; }
  const FluidParams& fluid() const { return fluid_; }
  const StiffnessParams& stiffness() const { return stiffness_; }
  double p0() const { return p0_; }
  double taper_rate() const { return taper_rate_; }
  Posture posture() const { return posture_; }
  int root_id() const { return root_id_; }
  std::size_t size() const { return vessels_.size(); }

  const Vessel& vessel(int id) const;
  std::size_t index_of(int id) const;
  bool contains(int id) const;
  std::span<const int> daughters(int id) const;
  std::vector<int> terminal_ids() const;

  /// Non-fatal findings collected during validation (e.g. expanding taper).
  const std::vector<std::string>& warnings() const { return warnings_; }

  /// Stiffness parameters for one vessel with its k3 override applied.
  StiffnessParams stiffness_for(const Vessel& v) const;

  // Copy-with-modification helpers; the receiver is left untouched.
  VesselNetwork with_fluid(FluidParams fluid) const;
  VesselNetwork with_stiffness(StiffnessParams stiffness) const;
  VesselNetwork with_p0(double p0) const;
  VesselNetwork with_overrides(int id, VesselOverrides overrides) const;

  bool operator==(const VesselNetwork& other) const;

 private:
  friend VesselNetwork assign_gravity_angles(const VesselNetwork&, Posture);

  std::vector<Vessel> vessels_;
  std::vector<Junction> junctions_;
  std::vector<std::vector<int>> daughters_;  // by vessel index
  FluidParams fluid_;
  StiffnessParams stiffness_;
  double p0_ = 0.0;
  double taper_rate_ = kDefaultTaperRate;
  Posture posture_ = Posture::kSupine;
  int root_id_ = 0;
  std::vector<std::string> warnings_;
};

/// Reads and validates a network JSON file. Throws ParseError, TopologyError
/// or ValidationError.
VesselNetwork load_network(const std::filesystem::path& path);
VesselNetwork parse_network(const std::string& json_text);
std::string serialize_network(const VesselNetwork& network);

struct PatientScaling {
  double literature_weight = 0.0;  // W1, kg
  double patient_weight = 0.0;     // W2, kg
  double exponent = 0.35;
  /// Use (W2/W1)^exponent instead of the (W1/W2)^exponent form.
  bool invert_ratio = false;
};

/// L2 = L1 (W1/W2)^alpha (or the inverted ratio when requested).
double allometric_scale(double length, const PatientScaling& scaling);

struct TaperSample {
  double x = 0.0;  // cm
  double r = 0.0;  // cm
};

struct TaperFit {
  Taper taper;
  double residual_norm = 0.0;  // ||r_i - r(x_i)||_2, cm
  int iterations = 0;
  bool converged = false;
};

/// Least-squares fit of r = n1 exp(-n2 x) + n3 by damped Gauss-Newton with
/// n1, n2 >= 0. On non-convergence the best iterate is returned with
/// converged = false.
TaperFit fit_taper(std::span<const TaperSample> samples);

/// Taper through (0, r_in) and (length, r_out) with the given decay rate.
Taper taper_through_endpoints(double r_in, double r_out, double length, double rate);

double radius_at(const Taper& taper, double x);
/// Throws ValidationError when x lies outside [0, L].
double radius_at(const Vessel& vessel, double x);

/// Sets theta for every vessel: pi/2 when supine; -pi / 0 / pi/2 for
/// up / down / horizontal vessels when upright.
VesselNetwork assign_gravity_angles(const VesselNetwork& network, Posture posture);

/// cos(theta) with exact values at the angles used for posture.
double gravity_cosine(double theta);

Orientation parse_orientation(const std::string& text);
std::string to_string(Orientation orientation);
Posture parse_posture(const std::string& text);
std::string to_string(Posture posture);

}  // namespace hemo1d

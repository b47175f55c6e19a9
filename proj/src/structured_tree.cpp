#include "hemo1d/structured_tree.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <utility>

#include <fftw3.h>
#include <fmt/format.h>

#include "hemo1d/units.hpp"

namespace hemo1d {

void StructuredTreeSpec::validate() const {
  if (!(root_radius > 0.0)) throw ValidationError(fmt::format("structured tree: root radius must be positive ({})", root_radius));
  if (!(beta > 0.0 && beta <= alpha && alpha < 1.0)) {
    throw ValidationError(fmt::format("structured tree: need 0 < beta <= alpha < 1 (alpha = {}, beta = {})", alpha, beta));
  }
  if (!(r_min > 0.0)) throw ValidationError(fmt::format("structured tree: r_min must be positive ({})", r_min));
  if (!(lrr > 0.0)) throw ValidationError(fmt::format("structured tree: lrr must be positive ({})", lrr));
  if (!(fluid.rho > 0.0 && fluid.mu > 0.0)) throw ValidationError("structured tree: rho and mu must be positive");
}

namespace {

// Radius of the class reached by j alpha-steps and k beta-steps. Both
// recursions use this so their DC values agree bit for bit.
double class_radius(const StructuredTreeSpec& spec, int j, int k) {
  return spec.root_radius * std::pow(spec.alpha, j) * std::pow(spec.beta, k);
}

Complex transfer(Complex z_out, double r0, double length, double omega, const StructuredTreeSpec& spec) {
  const double a0 = kPi * r0 * r0;
  const double compliance = 1.5 * a0 / stiffness(r0, spec.stiffness);
  const Complex one_minus_f = one_minus_womersley_factor(r0, omega, spec.fluid.nu());
  const Complex c = std::sqrt(a0 * one_minus_f / (spec.fluid.rho * compliance));
  const Complex g = compliance * c;  // sqrt(C A0 (1 - F_J) / rho)
  const Complex arg = omega * length / c;
  const Complex i(0.0, 1.0);
  if (std::abs(arg.imag()) > 20.0) {
    // sin and cos overflow long before their ratio does.
    const Complex t = std::tan(arg);
    return (i * t / g + z_out) / (1.0 + i * g * z_out * t);
  }
  const Complex e = std::exp(i * arg);
  const Complex e_inv = 1.0 / e;
  const Complex co = 0.5 * (e + e_inv);
  const Complex s = -0.5 * i * (e - e_inv);
  const Complex den = co + i * g * z_out * s;
  if (std::abs(den) < 1e-14) return Complex(std::nan(""), std::nan(""));
  return (i * s / g + z_out * co) / den;
}

struct Node {
  int j = 0;
  int k = 0;
  double radius = 0.0;
  int child_a = -1;  // index into node list
  int child_b = -1;
};

// Radius classes r_root alpha^j beta^k, ordered so that children precede parents.
std::vector<Node> build_nodes(const StructuredTreeSpec& spec) {
  std::map<std::pair<int, int>, int> index;
  std::vector<Node> nodes;
  auto radius = [&](int j, int k) { return class_radius(spec, j, k); };
  // Visit generation by generation, then reverse so deeper classes come first.
  std::vector<std::pair<int, int>> frontier{{0, 0}};
  index[{0, 0}] = 0;
  nodes.push_back({0, 0, spec.root_radius});
  for (std::size_t cursor = 0; cursor < nodes.size(); ++cursor) {
    const Node n = nodes[cursor];
    if (n.j + n.k + 1 > spec.max_generations && (spec.alpha * n.radius >= spec.r_min)) {
      throw ValidationError(fmt::format(
          "structured tree exceeds {} generations (root radius {}, r_min {}, alpha {}, beta {})",
          spec.max_generations, spec.root_radius, spec.r_min, spec.alpha, spec.beta));
    }
    const std::pair<int, int> kids[2] = {{n.j + 1, n.k}, {n.j, n.k + 1}};
    for (int c = 0; c < 2; ++c) {
      const double r = radius(kids[c].first, kids[c].second);
      if (r < spec.r_min) continue;
      auto [it, inserted] = index.emplace(kids[c], static_cast<int>(nodes.size()));
      if (inserted) nodes.push_back({kids[c].first, kids[c].second, r});
      if (c == 0) {
        nodes[cursor].child_a = it->second;
      } else {
        nodes[cursor].child_b = it->second;
      }
    }
  }
  return nodes;
}

Complex evaluate_explicit(const StructuredTreeSpec& spec, int j, int k, double omega) {
  if (j + k > spec.max_generations) {
    throw ValidationError(fmt::format("structured tree exceeds {} generations", spec.max_generations));
  }
  Complex inv = 0.0;
  bool any = false;
  for (const auto [dj, dk] : {std::pair{1, 0}, std::pair{0, 1}}) {
    if (class_radius(spec, j + dj, k + dk) < spec.r_min) continue;
    inv += 1.0 / evaluate_explicit(spec, j + dj, k + dk, omega);
    any = true;
  }
  const Complex distal = any ? 1.0 / inv : Complex(0.0);
  const double radius = class_radius(spec, j, k);
  return segment_impedance(distal, radius, spec.lrr * radius, omega, spec).value;
}

Complex evaluate_nodes(const StructuredTreeSpec& spec, const std::vector<Node>& nodes, double omega,
                       std::vector<Complex>& scratch, int& perturbed) {
  scratch.assign(nodes.size(), Complex(0.0));
  // Children always have a larger index than their parent (breadth-first insertion).
  for (std::size_t n = nodes.size(); n-- > 0;) {
    const Node& node = nodes[n];
    Complex inv = 0.0;
    bool any = false;
    if (node.child_a >= 0) {
      inv += 1.0 / scratch[node.child_a];
      any = true;
    }
    if (node.child_b >= 0) {
      inv += 1.0 / scratch[node.child_b];
      any = true;
    }
    const Complex distal = any ? 1.0 / inv : Complex(0.0);
    const SegmentImpedance seg = segment_impedance(distal, node.radius, spec.lrr * node.radius, omega, spec);
    if (seg.resonance_perturbed) ++perturbed;
    scratch[n] = seg.value;
  }
  return scratch[0];
}

}  // namespace

SegmentImpedance segment_impedance(Complex z_out, double r0, double length, double omega,
                                   const StructuredTreeSpec& spec) {
  if (!(r0 > 0.0)) throw ValidationError(fmt::format("segment_impedance: radius must be positive ({})", r0));
  if (!(omega >= 0.0)) throw ValidationError("segment_impedance: omega must be non-negative");
  if (length == 0.0) return {z_out, false};
  if (omega == 0.0) {
    const double r2 = r0 * r0;
    return {z_out + 8.0 * spec.fluid.mu * length / (kPi * r2 * r2), false};
  }
  Complex z = transfer(z_out, r0, length, omega, spec);
  if (std::isfinite(z.real()) && std::isfinite(z.imag())) return {z, false};
  // Resonant denominator: nudge the frequency and try again.
  for (double eps : {1e-9, -1e-9, 1e-7, -1e-7}) {
    z = transfer(z_out, r0, length, omega * (1.0 + eps), spec);
    if (std::isfinite(z.real()) && std::isfinite(z.imag())) return {z, true};
  }
  throw NumericalError(fmt::format("segment_impedance: resonance at omega = {} (r0 = {}, L = {})", omega, r0, length));
}

Complex tree_input_impedance(const StructuredTreeSpec& spec, double omega, bool memoize) {
  spec.validate();
  if (!memoize) return evaluate_explicit(spec, 0, 0, omega);
  const auto nodes = build_nodes(spec);
  std::vector<Complex> scratch;
  int perturbed = 0;
  return evaluate_nodes(spec, nodes, omega, scratch, perturbed);
}

int tree_radius_classes(const StructuredTreeSpec& spec) {
  spec.validate();
  return static_cast<int>(build_nodes(spec).size());
}

ImpedanceSpectrum root_impedance_spectrum(const StructuredTreeSpec& spec, double period, int samples,
                                          const SpectrumOptions& options) {
  spec.validate();
  if (samples < 16 || samples % 2 != 0) {
    throw ValidationError(fmt::format("impedance spectrum: sample count must be even and >= 16 (got {})", samples));
  }
  if (!(period > 0.0)) throw ValidationError("impedance spectrum: period must be positive");
  if (options.exact_harmonics < 0 || options.high_band_stride < 1) {
    throw ValidationError("impedance spectrum: invalid banding options");
  }
  const auto nodes = build_nodes(spec);
  ImpedanceSpectrum out;
  out.period = period;
  const int half = samples / 2;
  out.omega.resize(half + 1);
  out.impedance.resize(half + 1);
  std::vector<Complex> scratch;
  auto eval = [&](int k) { return evaluate_nodes(spec, nodes, out.omega[k], scratch, out.resonance_perturbations); };
  for (int k = 0; k <= half; ++k) out.omega[k] = 2.0 * kPi * k / period;
  const int exact = (options.exact_harmonics == 0) ? half : std::min(options.exact_harmonics, half);
  for (int k = 0; k <= exact; ++k) out.impedance[k] = eval(k);
  int last = exact;
  while (last < half) {
    const int next = std::min(last + options.high_band_stride, half);
    out.impedance[next] = eval(next);
    for (int k = last + 1; k < next; ++k) {
      const double w = static_cast<double>(k - last) / (next - last);
      out.impedance[k] = (1.0 - w) * out.impedance[last] + w * out.impedance[next];
    }
    last = next;
  }
  out.impulse = impulse_response(out.impedance, period);
  return out;
}

ImpedanceSpectrum constant_impedance_spectrum(double resistance, double period, int samples) {
  if (samples < 2 || samples % 2 != 0) throw ValidationError("impedance spectrum: sample count must be even");
  ImpedanceSpectrum out;
  out.period = period;
  const int half = samples / 2;
  for (int k = 0; k <= half; ++k) {
    out.omega.push_back(2.0 * kPi * k / period);
    out.impedance.emplace_back(resistance, 0.0);
  }
  out.impulse.assign(samples, 0.0);
  out.impulse[0] = resistance * samples / period;
  return out;
}

std::vector<double> impulse_response(std::span<const Complex> half_spectrum, double period) {
  const int half = static_cast<int>(half_spectrum.size()) - 1;
  const int n = 2 * half;
  if (half < 1) throw ValidationError("impulse_response: spectrum too short");
  auto* in = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * (half + 1)));
  auto* out = static_cast<double*>(fftw_malloc(sizeof(double) * n));
  fftw_plan plan = fftw_plan_dft_c2r_1d(n, in, out, FFTW_ESTIMATE);
  for (int k = 0; k <= half; ++k) {
    const bool real_only = (k == 0 || k == half);
    in[k][0] = half_spectrum[k].real();
    in[k][1] = real_only ? 0.0 : half_spectrum[k].imag();
  }
  fftw_execute(plan);
  std::vector<double> z(n);
  for (int j = 0; j < n; ++j) z[j] = out[j] / period;
  fftw_destroy_plan(plan);
  fftw_free(in);
  fftw_free(out);
  return z;
}

std::vector<double> impulse_response(const ImpedanceSpectrum& spectrum) {
  return impulse_response(spectrum.impedance, spectrum.period);
}

std::vector<Complex> spectrum_from_impulse(std::span<const double> impulse, double period) {
  const int n = static_cast<int>(impulse.size());
  if (n < 2 || n % 2 != 0) throw ValidationError("spectrum_from_impulse: length must be even");
  auto* in = static_cast<double*>(fftw_malloc(sizeof(double) * n));
  auto* out = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * (n / 2 + 1)));
  fftw_plan plan = fftw_plan_dft_r2c_1d(n, in, out, FFTW_ESTIMATE);
  for (int j = 0; j < n; ++j) in[j] = impulse[j];
  fftw_execute(plan);
  const double dt = period / n;
  std::vector<Complex> z(n / 2 + 1);
  for (int k = 0; k <= n / 2; ++k) z[k] = dt * Complex(out[k][0], out[k][1]);
  fftw_destroy_plan(plan);
  fftw_free(in);
  fftw_free(out);
  return z;
}

void write_spectrum_csv(const ImpedanceSpectrum& spectrum, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError(fmt::format("cannot write '{}'", path.string()));
  out << "omega_rad_s,re_z,im_z\n";
  for (std::size_t k = 0; k < spectrum.omega.size(); ++k) {
    out << fmt::format("{},{},{}\n", spectrum.omega[k], spectrum.impedance[k].real(), spectrum.impedance[k].imag());
  }
}

}  // namespace hemo1d

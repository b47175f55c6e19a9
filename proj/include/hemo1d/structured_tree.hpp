#pragma once

#include <complex>
#include <filesystem>
#include <span>
#include <vector>

#include "hemo1d/network.hpp"
#include "hemo1d/wall.hpp"

namespace hemo1d {

using Complex = std::complex<double>;

/// Womersley factor F_J = 2 J1(w0) / (w0 J0(w0)) with w0^2 = i^3 r0^2 omega / nu.
/// Returns exactly 1 at omega = 0.
Complex womersley_factor(double r0, double omega, double nu);

/// 1 - F_J, evaluated without cancellation for small Womersley numbers.
Complex one_minus_womersley_factor(double r0, double omega, double nu);

/// Asymmetric self-similar tree of small arteries hanging off one terminal
/// vessel. Daughters have radii alpha*r and beta*r; every segment has length
/// lrr*r; segments below r_min are not generated and the distal end of a
/// segment with no generated daughters sees zero impedance.
struct StructuredTreeSpec {
  double root_radius = 0.0;  // cm
  double alpha = 0.90;
  double beta = 0.60;
  double r_min = 0.01;  // cm
  double lrr = 50.0;
  FluidParams fluid;
  StiffnessParams stiffness;
  int max_generations = 60;

  /// Throws ValidationError unless 0 < beta <= alpha < 1, r_min > 0, lrr > 0.
  void validate() const;
};

struct SegmentImpedance {
  Complex value;
  bool resonance_perturbed = false;
};

/// Input impedance of a single uniform segment of radius r0 and length L
/// loaded by z_out, from the two-port transfer relation of the linearised
/// oscillatory flow equations. At omega = 0 this is the Poiseuille limit.
SegmentImpedance segment_impedance(Complex z_out, double r0, double length, double omega,
                                   const StructuredTreeSpec& spec);

/// Root input impedance Z(0, omega) of the whole tree at one frequency.
/// With memoize = false every explicit segment is visited (exponential cost).
Complex tree_input_impedance(const StructuredTreeSpec& spec, double omega, bool memoize = true);

/// Number of distinct (j, k) radius classes r_root alpha^j beta^k in the tree.
int tree_radius_classes(const StructuredTreeSpec& spec);

struct ImpedanceSpectrum {
  double period = 0.0;                 // T, s
  std::vector<double> omega;           // 2 pi k / T for k = 0..N/2, rad/s
  std::vector<Complex> impedance;      // Z(0, omega_k), g s / cm^4
  std::vector<double> impulse;         // z(t_j), j = 0..N-1, g / cm^4 / s
  int resonance_perturbations = 0;

  int samples() const { return static_cast<int>(impulse.size()); }
  double dt() const { return period / samples(); }
};

/// Which harmonics are evaluated exactly. Harmonics above `exact_harmonics`
/// are evaluated every `high_band_stride` harmonics (and at Nyquist) and
/// linearly interpolated in between. exact_harmonics = 0 evaluates every one.
struct SpectrumOptions {
  int exact_harmonics = 0;
  int high_band_stride = 8;
};

/// Evaluates Z(0, omega_k) for k = 0..N/2 and the periodic impulse response.
/// N must be even and >= 16. Throws ValidationError when the tree would exceed
/// spec.max_generations.
ImpedanceSpectrum root_impedance_spectrum(const StructuredTreeSpec& spec, double period, int samples,
                                          const SpectrumOptions& options = {});

/// Frequency-independent impedance R (a pure resistance) sampled like a tree spectrum.
ImpedanceSpectrum constant_impedance_spectrum(double resistance, double period, int samples);

/// Real periodic impulse response z_j = (1/T) sum_k Z_k exp(2 pi i j k / N) from a
/// half spectrum k = 0..N/2 (conjugate-symmetric extension, real Nyquist term).
/// Satisfies dt * sum_j z_j exp(-2 pi i j k / N) = Z_k.
std::vector<double> impulse_response(std::span<const Complex> half_spectrum, double period);
std::vector<double> impulse_response(const ImpedanceSpectrum& spectrum);

/// Forward transform of a sampled impulse response back to Z_k, k = 0..N/2.
std::vector<Complex> spectrum_from_impulse(std::span<const double> impulse, double period);

/// Debug dump: omega, Re Z, Im Z per line.
void write_spectrum_csv(const ImpedanceSpectrum& spectrum, const std::filesystem::path& path);

}  // namespace hemo1d

#include <doctest.h>

#include <cmath>
#include <complex>
#include <random>
#include <vector>

#include "hemo1d/structured_tree.hpp"
#include "hemo1d/units.hpp"
#include "support.hpp"

using namespace hemo1d;

namespace {

using LComplex = std::complex<long double>;

// Power series of J_n, summed in long double.
LComplex bessel_series(int n, LComplex z) {
  LComplex term = 1.0L;
  for (int k = 1; k <= n; ++k) term *= z / (2.0L * k);
  LComplex sum = term;
  const LComplex z2 = -z * z / 4.0L;
  for (int k = 1; k < 400; ++k) {
    term *= z2 / static_cast<long double>(k * (k + n));
    sum += term;
    if (std::abs(term) < 1e-22L * std::abs(sum)) break;
  }
  return sum;
}

LComplex womersley_argument(double r0, double omega, double nu) {
  const long double alpha = r0 * std::sqrt(static_cast<long double>(omega) / nu);
  return std::polar(alpha, -std::numbers::pi_v<long double> / 4);  // w^2 = i^3 alpha^2
}

std::complex<double> series_womersley(double r0, double omega, double nu) {
  const LComplex w = womersley_argument(r0, omega, nu);
  const LComplex f = 2.0L * bessel_series(1, w) / (w * bessel_series(0, w));
  return {static_cast<double>(f.real()), static_cast<double>(f.imag())};
}

// J1/J0 from the continued fraction J_n/J_{n-1} = 1/(2n/z - J_{n+1}/J_n),
// evaluated from the tail. Unlike the power series it keeps full precision
// for large arguments.
std::complex<double> fraction_womersley(double r0, double omega, double nu) {
  const LComplex w = womersley_argument(r0, omega, nu);
  const int depth = static_cast<int>(std::abs(w)) + 200;
  LComplex ratio = 0.0L;
  for (int n = depth; n >= 1; --n) ratio = 1.0L / (2.0L * n / w - ratio);
  const LComplex f = 2.0L * ratio / w;
  return {static_cast<double>(f.real()), static_cast<double>(f.imag())};
}

StructuredTreeSpec tree(double root) {
  StructuredTreeSpec s;
  s.root_radius = root;
  return s;
}

const double kNu = 0.032 / 1.057;

}  // namespace

TEST_CASE("Womersley factor against a series oracle") {
  CHECK(womersley_factor(0.1, 0.0, kNu) == std::complex<double>(1.0, 0.0));
  const double omega = 2 * kPi / 0.658;
  for (double r0 : {0.001, 0.01, 0.1, 0.3, 0.6}) {
    const auto f = womersley_factor(r0, omega, kNu);
    const auto oracle = series_womersley(r0, omega, kNu);
    CHECK(std::abs(f - oracle) <= 1e-10 * std::abs(oracle));
    CHECK(std::abs(fraction_womersley(r0, omega, kNu) - oracle) <= 1e-12 * std::abs(oracle));
  }
  // Higher harmonics and larger vessels reach the asymptotic branch.
  for (double r0 : {0.1, 0.5, 1.0, 1.5}) {
    for (int k : {1, 5, 40, 200, 512}) {
      const auto f = womersley_factor(r0, k * omega, kNu);
      const auto oracle = fraction_womersley(r0, k * omega, kNu);
      CHECK(std::abs(f - oracle) <= 1e-10 * std::abs(oracle));
    }
  }
}

TEST_CASE("Womersley factor limits") {
  double previous = 1.0;
  for (double omega : {1e2, 1e4, 1e6, 1e8}) {
    const double magnitude = std::abs(womersley_factor(1.0, omega, kNu));
    CHECK(magnitude < previous);
    previous = magnitude;
  }
  CHECK(previous < 1e-3);
  CHECK(std::isfinite(std::abs(womersley_factor(3.0, 1e9, kNu))));

  // 1 - F_J for small arguments against the series difference.
  const double omega = 2 * kPi / 0.658;
  const auto small = one_minus_womersley_factor(0.001, omega, kNu);
  const long double alpha2 = 1e-6L * omega / kNu;
  CHECK(small.imag() == doctest::Approx(static_cast<double>(alpha2 / 8)).epsilon(1e-4));
  for (double r0 : {0.05, 0.5}) {
    const auto diff = one_minus_womersley_factor(r0, omega, kNu);
    const auto direct = 1.0 - fraction_womersley(r0, omega, kNu);
    CHECK(std::abs(diff - direct) <= 1e-9 * std::abs(direct));
  }
}

TEST_CASE("segment impedance") {
  const StructuredTreeSpec spec = tree(0.01);
  CHECK(segment_impedance(0.0, 0.01, 0.5, 0.0, spec).value.real() == doctest::Approx(4.074e6).epsilon(1e-4));
  CHECK(segment_impedance(0.0, 0.01, 0.5, 0.0, spec).value.real() ==
        doctest::Approx(8 * 0.032 * 0.5 / (kPi * 1e-8)).epsilon(1e-14));

  const Complex load(1234.0, -56.0);
  CHECK(segment_impedance(load, 0.02, 0.0, 30.0, spec).value == load);

  const Complex dc = segment_impedance(0.0, 0.01, 0.5, 0.0, spec).value;
  const Complex near = segment_impedance(0.0, 0.01, 0.5, 1e-4, spec).value;
  CHECK(std::abs(near - dc) / std::abs(dc) < 1e-2);
  CHECK_THROWS_AS(segment_impedance(0.0, 0.0, 0.5, 1.0, spec), ValidationError);
}

TEST_CASE("single-segment tree") {
  const double r = 0.0105;  // both daughters fall below r_min
  const StructuredTreeSpec spec = tree(r);
  CHECK(tree_radius_classes(spec) == 1);
  CHECK(tree_input_impedance(spec, 0.0).real() ==
        doctest::Approx(8 * 0.032 * 50 / (kPi * r * r * r)).epsilon(1e-13));
}

TEST_CASE("symmetric tree splits into two equal halves") {
  StructuredTreeSpec parent = tree(0.05);
  parent.alpha = parent.beta = 0.8;
  StructuredTreeSpec daughter = parent;
  daughter.root_radius = 0.8 * 0.05;
  const double segment = segment_impedance(0.0, 0.05, 50 * 0.05, 0.0, parent).value.real();
  CHECK(tree_input_impedance(parent, 0.0).real() ==
        doctest::Approx(segment + 0.5 * tree_input_impedance(daughter, 0.0).real()).epsilon(1e-12));
}

TEST_CASE("DC impedance equals the explicit Poiseuille sum") {
  for (double r : {0.02, 0.05, 0.1, 0.2}) {
    const StructuredTreeSpec spec = tree(r);
    const double oracle = testing::explicit_dc(r, spec);
    CHECK(tree_input_impedance(spec, 0.0).real() == doctest::Approx(oracle).epsilon(1e-10));
    CHECK(tree_input_impedance(spec, 0.0).imag() == 0.0);
  }
}

TEST_CASE("memoized and explicit recursions agree") {
  const StructuredTreeSpec spec = tree(0.05);
  CHECK(tree_input_impedance(spec, 0.0, true) == tree_input_impedance(spec, 0.0, false));
  for (double omega : {1.0, 9.55, 100.0, 3000.0}) {
    const Complex a = tree_input_impedance(spec, omega, true);
    const Complex b = tree_input_impedance(spec, omega, false);
    CHECK(std::abs(a - b) <= 1e-12 * std::abs(b));
  }
}

TEST_CASE("deeper trees have larger DC resistance") {
  double previous = 0.0;
  for (double r_min : {0.05, 0.03, 0.02, 0.01, 0.005}) {
    StructuredTreeSpec spec = tree(0.1);
    spec.r_min = r_min;
    const double z = tree_input_impedance(spec, 0.0).real();
    CHECK(z > previous);
    previous = z;
  }
}

TEST_CASE("root spectrum") {
  const double period = 0.658;
  const int n = 2048;
  const ImpedanceSpectrum s = root_impedance_spectrum(tree(0.2), period, n);
  REQUIRE(s.omega.size() == n / 2 + 1);
  REQUIRE(s.impulse.size() == n);
  CHECK(s.impedance[0].real() == doctest::Approx(testing::explicit_dc(0.2, tree(0.2))).epsilon(1e-10));
  for (std::size_t k = 0; k < s.impedance.size(); ++k) {
    CHECK(s.omega[k] == doctest::Approx(2 * kPi * k / period));
    CHECK(s.impedance[k].real() > 0.0);
  }

  double mean = 0.0;
  for (double z : s.impulse) mean += z;
  CHECK(mean * s.dt() == doctest::Approx(s.impedance[0].real()).epsilon(1e-10));

  const auto back = spectrum_from_impulse(s.impulse, period);
  double worst = 0.0;
  for (std::size_t k = 0; k + 1 < back.size(); ++k) {
    worst = std::max(worst, std::abs(back[k] - s.impedance[k]) / std::abs(s.impedance[k]));
  }
  CHECK(worst < 1e-10);

  const ImpedanceSpectrum banded = root_impedance_spectrum(tree(0.2), period, n, {64, 8});
  for (int k = 0; k <= 64; ++k) CHECK(banded.impedance[k] == s.impedance[k]);
  for (std::size_t k = 0; k < banded.impedance.size(); ++k) CHECK(banded.impedance[k].real() > 0.0);
}

TEST_CASE("spectrum input errors") {
  CHECK_THROWS_AS(root_impedance_spectrum(tree(0.2), 0.658, 15), ValidationError);
  CHECK_THROWS_AS(root_impedance_spectrum(tree(0.2), 0.658, 8), ValidationError);
  StructuredTreeSpec deep = tree(0.2);
  deep.r_min = 1e-6;
  deep.max_generations = 20;
  CHECK_THROWS_AS(root_impedance_spectrum(deep, 0.658, 64), ValidationError);
  StructuredTreeSpec bad = tree(0.2);
  bad.beta = 0.95;
  CHECK_THROWS_AS(tree_input_impedance(bad, 0.0), ValidationError);
}

TEST_CASE("impulse response of a constant spectrum") {
  const double period = 0.5, r = 2000.0;
  const int n = 256;
  const ImpedanceSpectrum s = constant_impedance_spectrum(r, period, n);
  CHECK(s.impulse[0] == doctest::Approx(r * n / period).epsilon(1e-12));
  for (int j = 1; j < n; ++j) CHECK(std::abs(s.impulse[j]) < 1e-12 * r * n / period);
}

TEST_CASE("impulse response round trip") {
  std::mt19937 rng(11);
  std::normal_distribution<double> g;
  const int n = 512;
  std::vector<Complex> half(n / 2 + 1);
  for (auto& z : half) z = {g(rng), g(rng)};
  half.front().imag(0.0);
  half.back().imag(0.0);
  const auto z = impulse_response(half, 0.8);
  const auto back = spectrum_from_impulse(z, 0.8);
  for (std::size_t k = 0; k < half.size(); ++k) CHECK(std::abs(back[k] - half[k]) < 1e-10 * (1 + std::abs(half[k])));
}

TEST_CASE("single-pole spectrum has an exponential response") {
  // Z_k = dt (R/tau) / (1 - a e^{-2 pi i k/N}) with a = exp(-dt/tau) is the
  // transform of z_j = (R/tau) a^j / (1 - a^N).
  const double period = 0.658, r = 1500.0, tau = 0.05;
  const int n = 1024;
  const double dt = period / n;
  const double a = std::exp(-dt / tau);
  std::vector<Complex> half(n / 2 + 1);
  for (int k = 0; k <= n / 2; ++k) {
    half[k] = dt * (r / tau) / (1.0 - a * std::polar(1.0, -2 * kPi * k / n));
  }
  half.back().imag(0.0);
  const auto z = impulse_response(half, period);
  const double an = std::pow(a, n);
  for (int j = 0; j < n; ++j) {
    const double exact = (r / tau) * std::pow(a, j) / (1.0 - an);
    CHECK(z[j] == doctest::Approx(exact).epsilon(1e-8));
  }
}

// Womersley factor for complex argument. Three regimes by |w0|:
//   small  -> power series (written so 1 - F_J has no cancellation)
//   medium -> continued fraction for J1/J0 (modified Lentz)
//   large  -> Hankel asymptotic expansion of H^(2)_1 / H^(2)_0
#include <cmath>
#include <complex>

#include "hemo1d/structured_tree.hpp"
#include "hemo1d/units.hpp"

namespace hemo1d {

namespace {

constexpr double kSeriesLimit = 8.0;
constexpr double kAsymptoticLimit = 20.0;

// w0 = r0 sqrt(omega/nu) * exp(3 i pi / 4), one of the two square roots of
// i^3 r0^2 omega / nu. F_J is even in w0 so the choice does not matter.
Complex womersley_argument(double r0, double omega, double nu) {
  const double w = r0 * std::sqrt(omega / nu);
  return std::polar(w, 0.75 * kPi);
}

struct SeriesParts {
  Complex j0;          // J0(z)
  Complex j0_minus_f;  // J0(z) - 2 J1(z) / z
};

SeriesParts series(Complex z) {
  const Complex q = -0.25 * z * z;  // (-1)^k (z/2)^{2k} = q^k
  Complex term = 1.0;               // q^k / (k!)^2
  Complex j0 = 1.0;
  Complex diff = 0.0;
  for (int k = 1; k < 200; ++k) {
    term *= q / (static_cast<double>(k) * k);
    const Complex add_j0 = term;
    const Complex add_diff = term * (static_cast<double>(k) / (k + 1.0));
    j0 += add_j0;
    diff += add_diff;
    if (std::norm(add_j0) < 1e-36 * std::norm(j0) && std::norm(add_diff) < 1e-36 * std::norm(diff)) break;
  }
  return {j0, diff};
}

// J1(z)/J0(z) = 1 / (2/z - 1 / (4/z - 1 / (6/z - ...))).
Complex bessel_ratio_cf(Complex z) {
  constexpr double kTiny = 1e-300;
  const Complex inv_z = 1.0 / z;
  Complex f = kTiny;
  Complex c = f;
  Complex d = 0.0;
  for (int k = 1; k < 2000; ++k) {
    const Complex b = 2.0 * k * inv_z;
    const double a = (k == 1) ? 1.0 : -1.0;
    d = b + a * d;
    if (std::norm(d) < kTiny) d = kTiny;
    c = b + a / c;
    if (std::norm(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const Complex delta = c * d;
    f *= delta;
    if (std::norm(delta - 1.0) < 1e-31) break;
  }
  return f;
}

// sum_k (-i)^k a_k(nu) z^-k with a_k(nu) = prod_{m=1..k} (4 nu^2 - (2m-1)^2) / (k! 8^k).
Complex hankel2_series(int order, Complex z) {
  const double mu = 4.0 * order * order;
  const Complex step = Complex(0.0, -1.0) / z;
  Complex term = 1.0;
  Complex sum = 1.0;
  double last = 1.0;
  for (int k = 1; k < 200; ++k) {
    const double odd = 2.0 * k - 1.0;
    term *= step * ((mu - odd * odd) / (k * 8.0));
    const double mag = std::norm(term);
    if (mag > last) break;  // asymptotic series has started to diverge
    sum += term;
    last = mag;
    if (mag < 1e-36) break;
  }
  return sum;
}

}  // namespace

Complex womersley_factor(double r0, double omega, double nu) {
  return 1.0 - one_minus_womersley_factor(r0, omega, nu);
}

Complex one_minus_womersley_factor(double r0, double omega, double nu) {
  if (omega == 0.0) return 0.0;
  const Complex z = womersley_argument(r0, omega, nu);
  const double mag = std::abs(z);
  if (mag <= kSeriesLimit) {
    const SeriesParts s = series(z);
    return s.j0_minus_f / s.j0;
  }
  Complex ratio;  // J1/J0
  if (mag <= kAsymptoticLimit) {
    ratio = bessel_ratio_cf(z);
  } else {
    // Im z > 0, so J_n ~ H^(2)_n / 2 up to exponentially small terms and
    // H^(2)_1/H^(2)_0 = i S_1/S_0.
    ratio = Complex(0.0, 1.0) * hankel2_series(1, z) / hankel2_series(0, z);
  }
  return 1.0 - 2.0 * ratio / z;
}

}  // namespace hemo1d

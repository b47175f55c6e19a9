#include <doctest.h>

#include <cmath>
#include <complex>
#include <random>
#include <vector>

#include "hemo1d/convolution.hpp"
#include "hemo1d/structured_tree.hpp"
#include "hemo1d/units.hpp"

using namespace hemo1d;

TEST_CASE("streaming history matches the direct sum") {
  std::mt19937 rng(5);
  std::normal_distribution<double> g;
  for (int block : {4, 16, 64}) {
    for (int length : {1, 3, 64, 200, 1000}) {
      std::vector<double> kernel(length);
      for (double& h : kernel) h = g(rng) * std::exp(-0.01 * (&h - kernel.data()));
      StreamingConvolver conv(kernel, block);
      CHECK(conv.instantaneous() == kernel[0]);
      std::vector<double> inputs;
      double worst = 0.0;
      for (int n = 0; n < 3 * length + 5 * block; ++n) {
        const double expected = direct_history(kernel, inputs);
        worst = std::max(worst, std::abs(conv.history() - expected) / (1.0 + std::abs(expected)));
        const double x = g(rng);
        inputs.push_back(x);
        conv.push(x);
      }
      CHECK(conv.count() == static_cast<long long>(inputs.size()));
      CHECK(worst < 1e-12);
    }
  }
}

TEST_CASE("history starts at zero") {
  StreamingConvolver conv({1.0, 2.0, 3.0}, 4);
  CHECK(conv.history() == 0.0);
  conv.push(1.0);
  CHECK(conv.history() == 2.0);
  conv.push(0.5);
  CHECK(conv.history() == doctest::Approx(2.0 * 0.5 + 3.0));
  conv.push(0.0);
  conv.push(0.0);
  CHECK(conv.history() == 0.0);
}

TEST_CASE("zero kernel partitions are skipped") {
  std::vector<double> kernel(1024, 0.0);
  kernel[0] = 1.0;
  kernel[700] = 2.0;
  StreamingConvolver conv(kernel, 64);
  CHECK(conv.active_partitions() == 1);
  for (int n = 0; n < 700; ++n) conv.push(n == 0 ? 1.0 : 0.0);
  CHECK(conv.history() == doctest::Approx(2.0).epsilon(1e-12));
  conv.push(0.0);
  CHECK(std::abs(conv.history()) < 1e-12);
}

TEST_CASE("periodic convolution with a tree kernel reproduces the impedance") {
  StructuredTreeSpec spec;
  spec.root_radius = 0.1;
  const double period = 0.658;
  const int n = 1024;
  const ImpedanceSpectrum s = root_impedance_spectrum(spec, period, n);
  std::vector<double> kernel(n);
  for (int j = 0; j < n; ++j) kernel[j] = s.dt() * s.impulse[j];
  StreamingConvolver conv(kernel, 128);

  // Constant input: steady state is the DC resistance.
  for (int i = 0; i < 2 * n; ++i) conv.push(1.0);
  CHECK(conv.instantaneous() + conv.history() == doctest::Approx(s.impedance[0].real()).epsilon(1e-9));

  // Sinusoid at harmonic k: after one period the output is |Z| cos(wt + arg Z).
  for (int k : {1, 3, 10}) {
    StreamingConvolver c(kernel, 128);
    const double w = 2 * kPi * k / period;
    std::vector<double> out;
    for (int i = 0; i < 2 * n; ++i) {
      const double x = std::cos(w * i * s.dt());
      if (i >= n) out.push_back(c.instantaneous() * x + c.history());
      c.push(x);
    }
    std::complex<double> projected = 0.0;
    for (int i = 0; i < n; ++i) projected += out[i] * std::polar(2.0 / n, -w * (i + n) * s.dt());
    CHECK(std::abs(projected) == doctest::Approx(std::abs(s.impedance[k])).epsilon(0.01));
    CHECK(std::arg(projected) == doctest::Approx(std::arg(s.impedance[k])).epsilon(0.01));
  }
}

TEST_CASE("convolver rejects bad setup") {
  CHECK_THROWS_AS(StreamingConvolver({1.0}, 0), ValidationError);
  CHECK_THROWS_AS(StreamingConvolver({}, 8), ValidationError);
}

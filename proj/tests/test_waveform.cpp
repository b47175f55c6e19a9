#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <vector>

#include "hemo1d/units.hpp"
#include "hemo1d/waveform.hpp"

using namespace hemo1d;

namespace {

Waveform sine_wave(int samples, double period) {
  std::vector<double> v(samples);
  for (int i = 0; i < samples; ++i) v[i] = 50.0 + 30.0 * std::sin(2 * kPi * i / samples);
  return Waveform::uniform(v, period);
}

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("hemo1d_test_" + name);
}

}  // namespace

TEST_CASE("spline interpolation of a smooth signal") {
  const Waveform w = sine_wave(64, 0.8);
  CHECK(w.period() == 0.8);
  CHECK(w.size() == 64);
  for (double t = 0.0; t < 0.8; t += 0.0137) {
    CHECK(w(t) == doctest::Approx(50.0 + 30.0 * std::sin(2 * kPi * t / 0.8)).epsilon(1e-4));
  }
  CHECK(w(0.1) == doctest::Approx(w(0.9)).epsilon(1e-12));
  CHECK(w(-0.3) == doctest::Approx(w(0.5)).epsilon(1e-12));
  CHECK(w(w.times()[5]) == doctest::Approx(w.values()[5]).epsilon(1e-14));
}

TEST_CASE("mean and peak") {
  const Waveform w = sine_wave(40, 1.0);
  CHECK(w.mean() == doctest::Approx(50.0).epsilon(1e-12));
  CHECK(w.peak() == doctest::Approx(80.0).epsilon(1e-12));
}

TEST_CASE("scaling and resampling") {
  const Waveform w = sine_wave(64, 0.658);
  const Waveform s = w.scaled(2.0, 0.6);
  CHECK(s.period() == doctest::Approx(0.3948));
  CHECK(s.mean() == doctest::Approx(2 * w.mean()));
  CHECK(s(0.6 * 0.2) == doctest::Approx(2 * w(0.2)));
  const Waveform r = w.resampled(200);
  CHECK(r.size() == 200);
  CHECK(r.mean() == doctest::Approx(w.mean()).epsilon(1e-6));
}

TEST_CASE("from_samples checks its input") {
  const std::vector<double> t{0.0, 0.25, 0.5, 1.0};
  CHECK_NOTHROW(Waveform::from_samples(t, std::vector<double>{1.0, 2.0, 3.0, 1.005}));
  CHECK_THROWS_AS(Waveform::from_samples(t, std::vector<double>{1.0, 2.0, 3.0, 1.2}), ValidationError);
  CHECK_THROWS_AS(Waveform::from_samples(std::vector<double>{0.1, 0.25, 0.5, 1.0}, std::vector<double>{1, 2, 3, 1}),
                  ValidationError);
  CHECK_THROWS_AS(Waveform::from_samples(std::vector<double>{0.0, 0.5, 0.5, 1.0}, std::vector<double>{1, 2, 3, 1}),
                  ValidationError);
  CHECK_THROWS_AS(Waveform::from_samples(t, std::vector<double>{1.0, 2.0, 1.0}), ValidationError);
  CHECK_THROWS_AS(Waveform::uniform(std::vector<double>{1.0, 2.0, 3.0}, 0.0), ValidationError);
}

TEST_CASE("CSV round trip") {
  const Waveform w = sine_wave(32, 0.7);
  const auto path = temp_file("wave.csv");
  write_waveform_csv(w, path);
  const Waveform back = load_waveform_csv(path);
  REQUIRE(back.size() == w.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    CHECK(back.times()[i] == doctest::Approx(w.times()[i]).epsilon(1e-12));
    CHECK(back.values()[i] == doctest::Approx(w.values()[i]).epsilon(1e-12));
  }
  CHECK(back.period() == doctest::Approx(0.7).epsilon(1e-12));
  std::filesystem::remove(path);
}

TEST_CASE("CSV errors") {
  const auto path = temp_file("bad.csv");
  std::ofstream(path) << "time,flow\n0,1\n0.5,2\n1,1\n";
  CHECK_THROWS_AS(load_waveform_csv(path), ParseError);
  std::ofstream(path) << "t_s,q_mls\n0,1\n0.3,abc\n0.6,2\n1,1\n";
  CHECK_THROWS_AS(load_waveform_csv(path), ParseError);
  std::ofstream(path) << "t_s,q_mls\n0,10\n0.3,20\n0.6,30\n1,40\n";
  CHECK_THROWS_AS(load_waveform_csv(path), ValidationError);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_waveform_csv(temp_file("missing.csv")), ParseError);
}

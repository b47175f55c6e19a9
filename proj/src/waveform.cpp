#include "hemo1d/waveform.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "hemo1d/units.hpp"

namespace hemo1d {

Waveform Waveform::from_samples(std::span<const double> times, std::span<const double> values, WaveformKind kind) {
  if (times.size() != values.size()) throw ValidationError("waveform: time and value counts differ");
  if (times.size() < 4) throw ValidationError("waveform: need at least 4 samples including t = T");
  if (times.front() != 0.0) throw ValidationError(fmt::format("waveform: first sample must be at t = 0 (got {})", times.front()));
  for (std::size_t i = 1; i < times.size(); ++i) {
    if (!(times[i] > times[i - 1])) throw ValidationError(fmt::format("waveform: times must increase (row {})", i + 1));
  }
  for (double v : values) {
    if (!std::isfinite(v)) throw ValidationError("waveform: non-finite value");
  }
  double peak = 0.0;
  for (double v : values) peak = std::max(peak, std::abs(v));
  if (std::abs(values.back() - values.front()) > 0.01 * peak) {
    throw ValidationError(fmt::format("waveform: value at T ({}) differs from value at 0 ({}) by more than 1% of peak",
                                      values.back(), values.front()));
  }
  Waveform w;
  w.kind_ = kind;
  w.period_ = times.back();
  w.times_.assign(times.begin(), times.end() - 1);
  w.values_.assign(values.begin(), values.end() - 1);
  w.build_spline();
  return w;
}

Waveform Waveform::uniform(std::span<const double> values, double period, WaveformKind kind) {
  if (values.size() < 3) throw ValidationError("waveform: need at least 3 samples");
  if (!(period > 0.0)) throw ValidationError("waveform: period must be positive");
  Waveform w;
  w.kind_ = kind;
  w.period_ = period;
  w.values_.assign(values.begin(), values.end());
  w.times_.resize(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) w.times_[i] = period * static_cast<double>(i) / values.size();
  w.build_spline();
  return w;
}

// Periodic spline: h_{i-1} M_{i-1} + 2 (h_{i-1} + h_i) M_i + h_i M_{i+1} = 6 (d_i - d_{i-1}),
// indices modulo n. Cyclic tridiagonal system solved with Sherman-Morrison.
void Waveform::build_spline() {
  const std::size_t n = values_.size();
  std::vector<double> h(n), d(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t_next = (i + 1 < n) ? times_[i + 1] : period_;
    h[i] = t_next - times_[i];
    d[i] = (values_[(i + 1) % n] - values_[i]) / h[i];
  }
  std::vector<double> lower(n), diag(n), upper(n), rhs(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t prev = (i + n - 1) % n;
    lower[i] = h[prev];
    diag[i] = 2.0 * (h[prev] + h[i]);
    upper[i] = h[i];
    rhs[i] = 6.0 * (d[i] - d[prev]);
  }
  // Corner entries: row 0 couples to M_{n-1} (lower[0]); row n-1 couples to M_0 (upper[n-1]).
  const double alpha = upper[n - 1];
  const double beta = lower[0];
  const double gamma = -diag[0];
  auto thomas = [&](std::vector<double> a, std::vector<double> b, std::vector<double> c, std::vector<double> r) {
    for (std::size_t i = 1; i < n; ++i) {
      const double m = a[i] / b[i - 1];
      b[i] -= m * c[i - 1];
      r[i] -= m * r[i - 1];
    }
    std::vector<double> x(n);
    x[n - 1] = r[n - 1] / b[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) x[i] = (r[i] - c[i] * x[i + 1]) / b[i];
    return x;
  };
  std::vector<double> b = diag;
  b[0] -= gamma;
  b[n - 1] -= alpha * beta / gamma;
  std::vector<double> a = lower, c = upper;
  a[0] = 0.0;
  c[n - 1] = 0.0;
  const auto x = thomas(a, b, c, rhs);
  std::vector<double> u(n, 0.0);
  u[0] = gamma;
  u[n - 1] = alpha;
  const auto z = thomas(a, b, c, u);
  const double fact = (x[0] + beta * x[n - 1] / gamma) / (1.0 + z[0] + beta * z[n - 1] / gamma);
  second_.resize(n);
  for (std::size_t i = 0; i < n; ++i) second_[i] = x[i] - fact * z[i];
}

double Waveform::operator()(double t) const {
  double tau = std::fmod(t, period_);
  if (tau < 0.0) tau += period_;
  const std::size_t n = values_.size();
  auto it = std::upper_bound(times_.begin(), times_.end(), tau);
  const std::size_t i = static_cast<std::size_t>(std::distance(times_.begin(), it)) - 1;
  const std::size_t j = (i + 1) % n;
  const double t_next = (i + 1 < n) ? times_[i + 1] : period_;
  const double h = t_next - times_[i];
  const double a = (t_next - tau) / h;
  const double b = (tau - times_[i]) / h;
  if (b == 0.0) return values_[i];
  return a * values_[i] + b * values_[j] +
         ((a * a * a - a) * second_[i] + (b * b * b - b) * second_[j]) * (h * h) / 6.0;
}

double Waveform::mean() const {
  const std::size_t n = values_.size();
  double integral = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = (i + 1) % n;
    const double t_next = (i + 1 < n) ? times_[i + 1] : period_;
    const double h = t_next - times_[i];
    integral += 0.5 * h * (values_[i] + values_[j]) - h * h * h * (second_[i] + second_[j]) / 24.0;
  }
  return integral / period_;
}

double Waveform::peak() const {
  double peak = 0.0;
  for (double v : values_) peak = std::max(peak, std::abs(v));
  return peak;
}

Waveform Waveform::resampled(int samples) const {
  if (samples < 3) throw ValidationError("waveform: resample count must be >= 3");
  std::vector<double> v(samples);
  for (int i = 0; i < samples; ++i) v[i] = (*this)(period_ * i / samples);
  return uniform(v, period_, kind_);
}

Waveform Waveform::scaled(double value_factor, double time_factor) const {
  if (!(time_factor > 0.0)) throw ValidationError("waveform: time factor must be positive");
  Waveform w = *this;
  w.period_ = period_ * time_factor;
  for (auto& t : w.times_) t *= time_factor;
  for (auto& v : w.values_) v *= value_factor;
  w.build_spline();
  return w;
}

Waveform load_waveform_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(fmt::format("cannot open waveform file '{}'", path.string()));
  std::string line;
  if (!std::getline(in, line)) throw ParseError(fmt::format("{}: empty file", path.string()));
  if (!line.empty() && line.back() == '\r') line.pop_back();
  WaveformKind kind;
  if (line == "t_s,q_mls") {
    kind = WaveformKind::kFlow;
  } else if (line == "t_s,p_mmhg") {
    kind = WaveformKind::kPressure;
  } else {
    throw ParseError(fmt::format("{}: expected header 't_s,q_mls' (got '{}')", path.string(), line));
  }
  std::vector<double> t, v;
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string a, b;
    if (!std::getline(ss, a, ',') || !std::getline(ss, b)) {
      throw ParseError(fmt::format("{}:{}: expected two columns", path.string(), row));
    }
    try {
      t.push_back(std::stod(a));
      v.push_back(std::stod(b));
    } catch (const std::exception&) {
      throw ParseError(fmt::format("{}:{}: non-numeric value", path.string(), row));
    }
  }
  if (kind == WaveformKind::kPressure) {
    for (auto& x : v) x = from_mmhg(x);
  }
  return Waveform::from_samples(t, v, kind);
}

void write_waveform_csv(const Waveform& waveform, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError(fmt::format("cannot write '{}'", path.string()));
  const bool flow = waveform.kind() == WaveformKind::kFlow;
  out << (flow ? "t_s,q_mls\n" : "t_s,p_mmhg\n");
  auto emit = [&](double t, double v) { out << fmt::format("{},{}\n", t, flow ? v : to_mmhg(v)); };
  for (std::size_t i = 0; i < waveform.size(); ++i) emit(waveform.times()[i], waveform.values()[i]);
  emit(waveform.period(), waveform.values().front());
}

}  // namespace hemo1d

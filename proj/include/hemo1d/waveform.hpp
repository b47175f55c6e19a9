#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace hemo1d {

enum class WaveformKind { kFlow, kPressure };

/// One period of a periodic signal, interpolated by a periodic cubic spline.
///
/// Samples are stored for t in [0, T); the closing sample at t = T is implied
/// by periodicity.
class Waveform {
 public:
  Waveform() = default;

  /// `times` must start at 0, be strictly increasing and end at the period T;
  /// the value at T must match the value at 0 within 1% of the peak magnitude.
  static Waveform from_samples(std::span<const double> times, std::span<const double> values,
                               WaveformKind kind = WaveformKind::kFlow);

  /// Uniform samples over one period (no closing sample).
  static Waveform uniform(std::span<const double> values, double period, WaveformKind kind = WaveformKind::kFlow);

  double period() const { return period_; }
  WaveformKind kind() const { return kind_; }
  const std::vector<double>& times() const { return times_; }
  const std::vector<double>& values() const { return values_; }
  std::size_t size() const { return values_.size(); }

  /// Spline value at any t (periodic continuation).
  double operator()(double t) const;

  /// Exact mean of the spline over one period.
  double mean() const;

  double peak() const;

  Waveform resampled(int samples) const;

  /// Multiplies values by `value_factor` and stretches time by `time_factor`.
  Waveform scaled(double value_factor, double time_factor) const;

 private:
  void build_spline();

  std::vector<double> times_;
  std::vector<double> values_;
  std::vector<double> second_;  // spline second derivatives at the knots
  double period_ = 0.0;
  WaveformKind kind_ = WaveformKind::kFlow;
};

/// CSV with header `t_s,q_mls` (flow) or `t_s,p_mmhg` (pressure), covering one
/// period including the closing sample at t = T.
Waveform load_waveform_csv(const std::filesystem::path& path);
void write_waveform_csv(const Waveform& waveform, const std::filesystem::path& path);

}  // namespace hemo1d

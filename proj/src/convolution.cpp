#include "hemo1d/convolution.hpp"

#include <algorithm>
#include <utility>

#include <fftw3.h>
#include <fmt/format.h>

#include "hemo1d/units.hpp"

namespace hemo1d {

namespace {

fftw_complex* as_complex(void* p) { return static_cast<fftw_complex*>(p); }
fftw_plan as_plan(void* p) { return static_cast<fftw_plan>(p); }

}  // namespace

StreamingConvolver::StreamingConvolver(std::vector<double> kernel, int block) : kernel_(std::move(kernel)) {
  if (kernel_.empty()) throw ValidationError("convolver: empty kernel");
  if (block < 1) throw ValidationError("convolver: block size must be positive");
  block_ = std::min<int>(block, static_cast<int>(kernel_.size()));
  partitions_ = static_cast<int>((kernel_.size() + block_ - 1) / block_);
  kernel_.resize(static_cast<std::size_t>(partitions_) * block_, 0.0);
  head_.assign(block_, 0.0);
  for (int i = 1; i < block_; ++i) head_[i] = kernel_[block_ - i];
  window_.assign(2 * static_cast<std::size_t>(block_), 0.0);
  current_block_.assign(block_, 0.0);
  previous_block_.assign(block_, 0.0);
  tail_.assign(block_, 0.0);
  if (partitions_ < 2) return;

  const int m = 2 * block_;
  const int bins = block_ + 1;
  fft_real_ = fftw_alloc_real(m);
  fft_complex_ = fftw_alloc_complex(bins);
  forward_ = fftw_plan_dft_r2c_1d(m, fft_real_, as_complex(fft_complex_), FFTW_ESTIMATE);
  inverse_ = fftw_plan_dft_c2r_1d(m, as_complex(fft_complex_), fft_real_, FFTW_ESTIMATE);

  filters_.resize(partitions_);
  for (int p = 1; p < partitions_; ++p) {
    const auto first = kernel_.begin() + static_cast<std::ptrdiff_t>(p) * block_;
    if (std::all_of(first, first + block_, [](double v) { return v == 0.0; })) continue;
    std::fill(fft_real_, fft_real_ + m, 0.0);
    std::copy(first, first + block_, fft_real_);
    fftw_execute(as_plan(forward_));
    auto& f = filters_[p];
    f.resize(bins);
    const auto* c = as_complex(fft_complex_);
    for (int k = 0; k < bins; ++k) f[k] = {c[k][0], c[k][1]};
    active_.push_back(p);
  }
  spectra_.assign(partitions_, std::vector<std::complex<double>>(bins, 0.0));
}

StreamingConvolver::~StreamingConvolver() { release(); }

void StreamingConvolver::release() {
  if (forward_) fftw_destroy_plan(as_plan(forward_));
  if (inverse_) fftw_destroy_plan(as_plan(inverse_));
  if (fft_real_) fftw_free(fft_real_);
  if (fft_complex_) fftw_free(fft_complex_);
  forward_ = inverse_ = nullptr;
  fft_real_ = nullptr;
  fft_complex_ = nullptr;
}

StreamingConvolver::StreamingConvolver(StreamingConvolver&& other) noexcept { *this = std::move(other); }

StreamingConvolver& StreamingConvolver::operator=(StreamingConvolver&& other) noexcept {
  if (this == &other) return *this;
  release();
  kernel_ = std::move(other.kernel_);
  block_ = other.block_;
  partitions_ = other.partitions_;
  count_ = other.count_;
  head_ = std::move(other.head_);
  window_ = std::move(other.window_);
  current_block_ = std::move(other.current_block_);
  previous_block_ = std::move(other.previous_block_);
  tail_ = std::move(other.tail_);
  active_ = std::move(other.active_);
  filters_ = std::move(other.filters_);
  spectra_ = std::move(other.spectra_);
  spectra_head_ = other.spectra_head_;
  fft_real_ = std::exchange(other.fft_real_, nullptr);
  fft_complex_ = std::exchange(other.fft_complex_, nullptr);
  forward_ = std::exchange(other.forward_, nullptr);
  inverse_ = std::exchange(other.inverse_, nullptr);
  return *this;
}

double StreamingConvolver::history() const {
  if (kernel_.empty()) return 0.0;
  // x_{n-B+i} sits at window_[s + i] with s = n mod B; inputs before n = 0 are zero.
  const std::size_t s = static_cast<std::size_t>(count_ % block_);
  const double* w = window_.data() + s;
  const double* h = head_.data();
  double sum = 0.0;
  for (int i = 1; i < block_; ++i) sum += h[i] * w[i];
  return sum + tail_[s];
}

void StreamingConvolver::push(double x) {
  if (kernel_.empty()) return;
  const std::size_t slot = static_cast<std::size_t>(count_ % block_);
  window_[slot] = x;
  window_[slot + block_] = x;
  current_block_[slot] = x;
  ++count_;
  if (count_ % block_ == 0) close_block();
}

// Called once block m-1 is complete: forms the spectrum of [block m-2, block m-1]
// and evaluates the far part for every position of block m.
void StreamingConvolver::close_block() {
  if (partitions_ < 2) {
    previous_block_.swap(current_block_);
    return;
  }
  const int m = 2 * block_;
  const int bins = block_ + 1;
  std::copy(previous_block_.begin(), previous_block_.end(), fft_real_);
  std::copy(current_block_.begin(), current_block_.end(), fft_real_ + block_);
  fftw_execute(as_plan(forward_));
  spectra_head_ = (spectra_head_ + 1) % partitions_;
  auto& latest = spectra_[spectra_head_];
  const auto* c = as_complex(fft_complex_);
  for (int k = 0; k < bins; ++k) latest[k] = {c[k][0], c[k][1]};
  previous_block_.swap(current_block_);

  // Partition p pairs with the spectrum formed p-1 closes ago.
  std::vector<std::complex<double>> acc(bins, 0.0);
  for (int p : active_) {
    const auto& x = spectra_[(spectra_head_ - (p - 1) + partitions_) % partitions_];
    const auto& h = filters_[p];
    for (int k = 0; k < bins; ++k) acc[k] += h[k] * x[k];
  }
  auto* out = as_complex(fft_complex_);
  for (int k = 0; k < bins; ++k) {
    out[k][0] = acc[k].real();
    out[k][1] = acc[k].imag();
  }
  fftw_execute(as_plan(inverse_));
  const double scale = 1.0 / m;
  for (int i = 0; i < block_; ++i) tail_[i] = fft_real_[block_ + i] * scale;
}

double direct_history(std::span<const double> kernel, std::span<const double> inputs) {
  const std::size_t n = inputs.size();
  double sum = 0.0;
  for (std::size_t j = 1; j < kernel.size() && j <= n; ++j) sum += kernel[j] * inputs[n - j];
  return sum;
}

}  // namespace hemo1d

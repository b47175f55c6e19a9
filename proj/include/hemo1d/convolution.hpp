#pragma once

#include <complex>
#include <span>
#include <vector>

namespace hemo1d {

/// Streaming causal convolution y_n = sum_{j=0}^{N-1} h_j x_{n-j} with x_{<0} = 0.
///
/// The tail j >= B is evaluated block-wise with uniformly partitioned
/// overlap-save FFTs; the head 1 <= j < B is summed directly every step.
/// The current sample's coefficient h_0 is exposed separately because the
/// outlet solve treats it implicitly.
class StreamingConvolver {
 public:
  StreamingConvolver() = default;
  explicit StreamingConvolver(std::vector<double> kernel, int block = 256);
  ~StreamingConvolver();
  StreamingConvolver(const StreamingConvolver&) = delete;
  StreamingConvolver& operator=(const StreamingConvolver&) = delete;
  StreamingConvolver(StreamingConvolver&& other) noexcept;
  StreamingConvolver& operator=(StreamingConvolver&& other) noexcept;

  double instantaneous() const { return kernel_.empty() ? 0.0 : kernel_[0]; }

  /// sum_{j>=1} h_j x_{n-j} for the next sample index n.
  double history() const;

  /// Commits x_n and advances n.
  void push(double x);

  long long count() const { return count_; }
  int block() const { return block_; }
  int active_partitions() const { return static_cast<int>(active_.size()); }

 private:
  void release();
  void close_block();

  std::vector<double> kernel_;
  int block_ = 0;
  int partitions_ = 0;
  long long count_ = 0;

  std::vector<double> head_;    // h_{B-i} at position i, so the direct sum is a forward dot product
  std::vector<double> window_;  // last B inputs stored twice so every window is contiguous
  std::vector<double> current_block_;
  std::vector<double> previous_block_;
  std::vector<double> tail_;  // far contribution for each position of the current block

  std::vector<int> active_;                                   // partitions with a nonzero filter
  std::vector<std::vector<std::complex<double>>> filters_;    // indexed by partition
  std::vector<std::vector<std::complex<double>>> spectra_;    // input spectra ring
  int spectra_head_ = 0;

  double* fft_real_ = nullptr;
  void* fft_complex_ = nullptr;
  void* forward_ = nullptr;
  void* inverse_ = nullptr;
};

/// Direct O(N) reference used by tests and for short kernels.
double direct_history(std::span<const double> kernel, std::span<const double> inputs);

}  // namespace hemo1d

// Copyright 2026 The SMLE Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <complex>
#include <span>
#include <vector>

namespace smle {

/// Real-input FFT of a fixed power-of-two length, computed through a
/// half-length complex transform.
class RealFft {
 public:
  explicit RealFft(int size);

  int size() const { return n_; }
  int bins() const { return n_ / 2 + 1; }

  /// out[k] = sum_n in[n] exp(-2 pi i k n / N), k in [0, N/2].
  void forward(std::span<const double> in,
               std::span<std::complex<double>> out) const;

  /// Inverse of forward() including the 1/N factor. The imaginary parts of
  /// the DC and Nyquist bins are ignored.
  void inverse(std::span<const std::complex<double>> in,
               std::span<double> out) const;

 private:
  void complex_fft(std::vector<std::complex<double>>& data) const;

  int n_;
  int half_;
  std::vector<int> bitrev_;
  std::vector<std::complex<double>> twiddle_;  // exp(-2 pi i k / half)
  std::vector<std::complex<double>> split_;    // exp(-2 pi i k / N)
};

/// Shared plan for a given size; plans are immutable once built.
const RealFft& fft_plan(int size);

}  // namespace smle

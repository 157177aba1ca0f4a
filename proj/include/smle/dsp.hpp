// Copyright 2026 The SMLE Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Short-time Fourier analysis/synthesis and time-frequency masking.
//
// Frames start at sample 0 without centering; a trailing partial frame is
// dropped, so T = floor((len - frame_size) / hop) + 1. Analysis and synthesis
// both use a periodic Hann window and synthesis divides by the summed squared
// window (weighted overlap-add).

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "smle/common.hpp"

namespace smle {

struct StftConfig {
  int frame_size = 1024;
  int hop = 256;

  int bins() const { return frame_size / 2 + 1; }
  void validate() const;
  bool operator==(const StftConfig&) const = default;
};

/// Complex STFT, bins() x frames, one column per frame.
struct Spectrogram {
  ComplexMatrix bins;
  StftConfig config;

  int num_bins() const { return static_cast<int>(bins.rows()); }
  int num_frames() const { return static_cast<int>(bins.cols()); }
};

/// Number of complete frames in a signal of `length` samples; throws
/// "input too short" when not even one frame fits.
int num_frames(std::size_t length, const StftConfig& config);

/// Samples reconstructed by istft for `frames` frames: (T - 1) * hop + N.
std::size_t covered_length(int frames, const StftConfig& config);

/// Half-open range of samples covered by frame_size / hop frames.
struct SampleRange {
  std::size_t begin = 0;
  std::size_t end = 0;
};
SampleRange interior_range(std::size_t length, const StftConfig& config);

std::vector<double> hann_window(int size);

Spectrogram stft(std::span<const double> signal, const StftConfig& config = {});

/// Weighted overlap-add inverse. Samples past covered_length() are zero.
Signal istft(const Spectrogram& spec, std::size_t out_len);

/// Adjoint of istft with respect to the real and imaginary parts of every
/// bin, packed as complex numbers. `grad_signal` is dL/d(output samples).
ComplexMatrix istft_adjoint(std::span<const double> grad_signal, int frames,
                            const StftConfig& config);

Matrix magnitude(const Spectrogram& spec);

/// Elementwise real scaling of the complex bins; the mixture phase is kept.
Spectrogram apply_mask(const Matrix& mask, const Spectrogram& mixture);

}  // namespace smle

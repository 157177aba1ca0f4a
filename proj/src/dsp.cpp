// Copyright 2026 The SMLE Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "smle/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "smle/fft.hpp"

namespace smle {
namespace {

constexpr double kNormFloor = 1e-10;
// Edge samples see only the tail of one window; dividing a masked frame by
// that tiny window sum amplifies it without bound, so floor the divisor at a
// fraction of the steady-state sum.
constexpr double kRelativeNormFloor = 0.1;

std::vector<double> window_norm(std::size_t length, int frames,
                                const StftConfig& config,
                                const std::vector<double>& window) {
  std::vector<double> norm(length, 0.0);
  for (int t = 0; t < frames; ++t) {
    const std::size_t start = static_cast<std::size_t>(t) * config.hop;
    for (int j = 0; j < config.frame_size; ++j)
      norm[start + j] += window[j] * window[j];
  }
  double peak = 0.0;
  for (double v : norm) peak = std::max(peak, v);
  const double floor = std::max(kNormFloor, kRelativeNormFloor * peak);
  for (double& v : norm) v = std::max(v, floor);
  return norm;
}

}  // namespace

void StftConfig::validate() const {
  if (frame_size < 4 || (frame_size & (frame_size - 1)) != 0)
    throw Error("frame_size must be a power of two, got " +
                std::to_string(frame_size));
  if (hop < 1 || hop > frame_size)
    throw Error("hop must lie in [1, frame_size], got " + std::to_string(hop));
}

int num_frames(std::size_t length, const StftConfig& config) {
  config.validate();
  if (length < static_cast<std::size_t>(config.frame_size))
    throw Error("input too short: " + std::to_string(length) +
                " samples, need at least " + std::to_string(config.frame_size));
  return static_cast<int>((length - config.frame_size) / config.hop) + 1;
}

std::size_t covered_length(int frames, const StftConfig& config) {
  if (frames < 1) return 0;
  return static_cast<std::size_t>(frames - 1) * config.hop + config.frame_size;
}

SampleRange interior_range(std::size_t length, const StftConfig& config) {
  const int frames = num_frames(length, config);
  return {static_cast<std::size_t>(config.frame_size - config.hop),
          static_cast<std::size_t>(frames) * config.hop};
}

std::vector<double> hann_window(int size) {
  std::vector<double> w(size);
  for (int n = 0; n < size; ++n)
    w[n] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * n / size);
  return w;
}

Spectrogram stft(std::span<const double> signal, const StftConfig& config) {
  const int frames = num_frames(signal.size(), config);
  const RealFft& fft = fft_plan(config.frame_size);
  const std::vector<double> window = hann_window(config.frame_size);

  Spectrogram out{ComplexMatrix(config.bins(), frames), config};
  std::vector<double> frame(config.frame_size);
  for (int t = 0; t < frames; ++t) {
    const std::size_t start = static_cast<std::size_t>(t) * config.hop;
    for (int j = 0; j < config.frame_size; ++j)
      frame[j] = window[j] * signal[start + j];
    fft.forward(frame, std::span(out.bins.col(t).data(), config.bins()));
  }
  return out;
}

Signal istft(const Spectrogram& spec, std::size_t out_len) {
  const StftConfig& config = spec.config;
  if (spec.num_bins() != config.bins())
    throw Error("istft: spectrogram has " + std::to_string(spec.num_bins()) +
                " bins, expected " + std::to_string(config.bins()));
  if (num_frames(out_len, config) != spec.num_frames())
    throw Error("istft: out_len " + std::to_string(out_len) +
                " is inconsistent with " + std::to_string(spec.num_frames()) +
                " frames");
  const int frames = spec.num_frames();
  const RealFft& fft = fft_plan(config.frame_size);
  const std::vector<double> window = hann_window(config.frame_size);
  const std::vector<double> norm = window_norm(out_len, frames, config, window);

  Signal out(out_len, 0.0);
  std::vector<double> frame(config.frame_size);
  for (int t = 0; t < frames; ++t) {
    fft.inverse(std::span(spec.bins.col(t).data(), config.bins()), frame);
    const std::size_t start = static_cast<std::size_t>(t) * config.hop;
    for (int j = 0; j < config.frame_size; ++j)
      out[start + j] += window[j] * frame[j];
  }
  for (std::size_t n = 0; n < out_len; ++n)
    out[n] = norm[n] > kNormFloor ? out[n] / norm[n] : 0.0;
  return out;
}

ComplexMatrix istft_adjoint(std::span<const double> grad_signal, int frames,
                            const StftConfig& config) {
  const std::size_t length = grad_signal.size();
  if (num_frames(length, config) != frames)
    throw Error("istft_adjoint: gradient length inconsistent with frames");
  const RealFft& fft = fft_plan(config.frame_size);
  const std::vector<double> window = hann_window(config.frame_size);
  const std::vector<double> norm = window_norm(length, frames, config, window);
  const int n = config.frame_size;
  const int half = n / 2;

  ComplexMatrix grad(config.bins(), frames);
  std::vector<double> frame(n);
  for (int t = 0; t < frames; ++t) {
    const std::size_t start = static_cast<std::size_t>(t) * config.hop;
    for (int j = 0; j < n; ++j) {
      const double d = norm[start + j];
      frame[j] = d > kNormFloor ? window[j] * grad_signal[start + j] / d : 0.0;
    }
    auto col = std::span(grad.col(t).data(), config.bins());
    fft.forward(frame, col);
    // irfft counts interior bins twice (Hermitian mirror).
    for (int k = 0; k <= half; ++k) {
      const double weight = (k == 0 || k == half) ? 1.0 : 2.0;
      col[k] *= weight / n;
    }
  }
  return grad;
}

Matrix magnitude(const Spectrogram& spec) {
  // sqrt(re^2 + im^2) rather than hypot; the overflow guard is not needed here.
  return spec.bins.unaryExpr([](const std::complex<double>& c) {
    return std::sqrt(c.real() * c.real() + c.imag() * c.imag());
  });
}

Spectrogram apply_mask(const Matrix& mask, const Spectrogram& mixture) {
  if (mask.rows() != mixture.bins.rows() || mask.cols() != mixture.bins.cols())
    throw Error("apply_mask: mask is " + std::to_string(mask.rows()) + "x" +
                std::to_string(mask.cols()) + ", spectrogram is " +
                std::to_string(mixture.bins.rows()) + "x" +
                std::to_string(mixture.bins.cols()));
  Spectrogram out{ComplexMatrix(mixture.bins.rows(), mixture.bins.cols()), mixture.config};
  for (Eigen::Index i = 0; i < mask.size(); ++i) out.bins(i) = mixture.bins(i) * mask(i);
  return out;
}

}  // namespace smle

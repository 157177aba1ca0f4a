// Copyright 2026 The SMLE Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "smle/fft.hpp"

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>

#include "smle/common.hpp"

namespace smle {

RealFft::RealFft(int size) : n_(size), half_(size / 2) {
  if (size < 4 || (size & (size - 1)) != 0)
    throw Error("fft size must be a power of two >= 4, got " +
                std::to_string(size));
  int bits = 0;
  while ((1 << bits) < half_) ++bits;
  bitrev_.resize(half_);
  for (int i = 0; i < half_; ++i) {
    int r = 0;
    for (int b = 0; b < bits; ++b)
      if (i & (1 << b)) r |= 1 << (bits - 1 - b);
    bitrev_[i] = r;
  }
  twiddle_.resize(half_ / 2 > 0 ? half_ / 2 : 1);
  for (int k = 0; k < static_cast<int>(twiddle_.size()); ++k)
    twiddle_[k] = std::polar(1.0, -2.0 * std::numbers::pi * k / half_);
  split_.resize(half_);
  for (int k = 0; k < half_; ++k)
    split_[k] = std::polar(1.0, -2.0 * std::numbers::pi * k / n_);
}

void RealFft::complex_fft(std::vector<std::complex<double>>& a) const {
  const int n = half_;
  for (int i = 0; i < n; ++i)
    if (i < bitrev_[i]) std::swap(a[i], a[bitrev_[i]]);
  // Explicit real arithmetic: std::complex multiplication goes through the
  // Annex G NaN-recovery path, which is several times slower.
  double* d = reinterpret_cast<double*>(a.data());
  for (int len = 2; len <= n; len <<= 1) {
    const int step = n / len;
    const int h = len / 2;
    for (int i = 0; i < n; i += len) {
      for (int j = 0; j < h; ++j) {
        const std::complex<double> w = twiddle_[j * step];
        double* u = d + 2 * (i + j);
        double* v = d + 2 * (i + j + h);
        const double vr = v[0] * w.real() - v[1] * w.imag();
        const double vi = v[0] * w.imag() + v[1] * w.real();
        v[0] = u[0] - vr;
        v[1] = u[1] - vi;
        u[0] += vr;
        u[1] += vi;
      }
    }
  }
}

void RealFft::forward(std::span<const double> in,
                      std::span<std::complex<double>> out) const {
  if (static_cast<int>(in.size()) != n_ || static_cast<int>(out.size()) != bins())
    throw Error("RealFft::forward: size mismatch");
  thread_local std::vector<std::complex<double>> z;
  z.resize(half_);
  for (int m = 0; m < half_; ++m) z[m] = {in[2 * m], in[2 * m + 1]};
  complex_fft(z);
  // Split the packed transform into even and odd halves.
  const double z0r = z[0].real(), z0i = z[0].imag();
  out[0] = {z0r + z0i, 0.0};
  out[half_] = {z0r - z0i, 0.0};
  for (int k = 1; k < half_; ++k) {
    const double ar = z[k].real(), ai = z[k].imag();
    const double br = z[half_ - k].real(), bi = -z[half_ - k].imag();
    const double er = 0.5 * (ar + br), ei = 0.5 * (ai + bi);
    // odd = -i/2 * (zk - conj(z[half-k]))
    const double or_ = 0.5 * (ai - bi), oi = -0.5 * (ar - br);
    const double wr = split_[k].real(), wi = split_[k].imag();
    out[k] = {er + wr * or_ - wi * oi, ei + wr * oi + wi * or_};
  }
}

void RealFft::inverse(std::span<const std::complex<double>> in,
                      std::span<double> out) const {
  if (static_cast<int>(in.size()) != bins() || static_cast<int>(out.size()) != n_)
    throw Error("RealFft::inverse: size mismatch");
  thread_local std::vector<std::complex<double>> z;
  z.resize(half_);
  // DC and Nyquist imaginary parts are ignored.
  {
    const double x0 = in[0].real(), xn = in[half_].real();
    z[0] = {0.5 * (x0 + xn), -0.5 * (x0 - xn)};
  }
  for (int k = 1; k < half_; ++k) {
    const double ar = in[k].real(), ai = in[k].imag();
    const double br = in[half_ - k].real(), bi = -in[half_ - k].imag();
    const double er = 0.5 * (ar + br), ei = 0.5 * (ai + bi);
    const double dr = 0.5 * (ar - br), di = 0.5 * (ai - bi);
    // odd = d * conj(split_k), then z = conj(even + i * odd)
    const double wr = split_[k].real(), wi = -split_[k].imag();
    const double odr = dr * wr - di * wi, odi = dr * wi + di * wr;
    z[k] = {er - odi, -(ei + odr)};
  }
  complex_fft(z);
  const double scale = 1.0 / half_;
  for (int m = 0; m < half_; ++m) {
    out[2 * m] = z[m].real() * scale;
    out[2 * m + 1] = -z[m].imag() * scale;
  }
}

const RealFft& fft_plan(int size) {
  static std::mutex mutex;
  static std::map<int, std::unique_ptr<RealFft>> plans;
  std::lock_guard<std::mutex> lock(mutex);
  auto& slot = plans[size];
  if (!slot) slot = std::make_unique<RealFft>(size);
  return *slot;
}

}  // namespace smle

// Copyright 2026 The SMLE Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <doctest.h>

#include <cmath>
#include <complex>
#include <numbers>

#include "helpers.hpp"
#include "smle/dsp.hpp"
#include "smle/fft.hpp"
#include "smle/metrics.hpp"

using namespace smle;
using smle::test::gaussian;

namespace {

using cd = std::complex<double>;

// Direct O(N^2) evaluation of the first N/2+1 DFT bins.
std::vector<cd> naive_dft(const std::vector<double>& x) {
  const std::size_t n = x.size();
  std::vector<cd> out(n / 2 + 1);
  for (std::size_t k = 0; k < out.size(); ++k) {
    cd acc = 0.0;
    for (std::size_t t = 0; t < n; ++t)
      acc += x[t] * std::polar(1.0, -2.0 * std::numbers::pi * double(k * t) / double(n));
    out[k] = acc;
  }
  return out;
}

double max_abs_diff(std::span<const double> a, std::span<const double> b, std::size_t from,
                    std::size_t to) {
  double m = 0.0;
  for (std::size_t i = from; i < to; ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST_SUITE("dsp") {

TEST_CASE("real FFT matches direct DFT evaluation") {
  for (int n : {4, 8, 16, 64, 256, 1024}) {
    CAPTURE(n);
    const Signal x = gaussian(n, 100 + n);
    std::vector<cd> fast(n / 2 + 1);
    fft_plan(n).forward(x, fast);
    const std::vector<cd> slow = naive_dft(x);
    for (int k = 0; k <= n / 2; ++k) CHECK(std::abs(fast[k] - slow[k]) < 1e-9 * n);

    std::vector<double> back(n);
    fft_plan(n).inverse(fast, back);
    CHECK(max_abs_diff(x, back, 0, n) < 1e-12);
  }
  CHECK_THROWS_AS(RealFft(12), Error);
}

TEST_CASE("stft shape and short input") {
  const Signal x = gaussian(16000, 1);
  const Spectrogram s = stft(x);
  CHECK(s.num_bins() == 513);
  CHECK(s.num_frames() == 59);
  CHECK(covered_length(59, s.config) == 15872);

  const Signal short_x(1023, 0.1);
  CHECK_THROWS_WITH_AS(stft(short_x), doctest::Contains("input too short"), Error);
  CHECK(stft(Signal(1024, 0.0)).num_frames() == 1);
}

TEST_CASE("stft of zeros is zero") {
  const Spectrogram s = stft(Signal(4000, 0.0));
  CHECK(s.bins.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("stft frame equals DFT of the windowed frame") {
  const Signal x = gaussian(3000, 2);
  StftConfig cfg;
  const Spectrogram s = stft(x, cfg);
  const std::vector<double> w = hann_window(cfg.frame_size);
  CHECK(w[0] == 0.0);
  CHECK(w[512] == doctest::Approx(1.0));
  for (int t : {0, 3, s.num_frames() - 1}) {
    std::vector<double> frame(cfg.frame_size);
    for (int j = 0; j < cfg.frame_size; ++j) frame[j] = w[j] * x[t * cfg.hop + j];
    const std::vector<cd> ref = naive_dft(frame);
    double err = 0.0;
    for (int k = 0; k < cfg.bins(); ++k) err = std::max(err, std::abs(ref[k] - s.bins(k, t)));
    CHECK(err < 1e-9);
  }
}

TEST_CASE("bin-centred cosine peaks at its bin") {
  for (int k : {5, 32, 100, 400}) {
    Signal x(8000);
    for (std::size_t n = 0; n < x.size(); ++n)
      x[n] = std::cos(2.0 * std::numbers::pi * k * double(n) / 1024.0);
    const Matrix mag = magnitude(stft(x));
    for (Eigen::Index t = 0; t < mag.cols(); ++t) {
      Eigen::Index arg = 0;
      mag.col(t).maxCoeff(&arg);
      CHECK(arg == k);
    }
  }
}

TEST_CASE("istft reconstructs the interior") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Signal x = gaussian(32000, 10 + seed);
    const Spectrogram s = stft(x);
    const std::size_t len = covered_length(s.num_frames(), s.config);
    const Signal y = istft(s, len);
    REQUIRE(y.size() == len);
    const SampleRange r = interior_range(len, s.config);
    CHECK(r.begin == 768);
    CHECK(max_abs_diff(x, y, r.begin, r.end) < 1e-6);
  }
}

TEST_CASE("istft of zeros and inconsistent length") {
  Spectrogram z{ComplexMatrix::Zero(513, 10), {}};
  const Signal y = istft(z, covered_length(10, z.config));
  for (double v : y) CHECK(v == 0.0);
  CHECK_THROWS_AS(istft(z, covered_length(10, z.config) + 256), Error);
  CHECK_THROWS_AS(istft(z, 100), Error);
  // Lengths inside the same frame count are accepted.
  CHECK(istft(z, covered_length(10, z.config) + 255).size() == covered_length(10, z.config) + 255);
}

TEST_CASE("stft and istft are linear") {
  const Signal a = gaussian(9000, 3);
  const Signal b = gaussian(9000, 4, 0.3);
  Signal sum(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) sum[i] = a[i] + b[i];
  const std::size_t len = covered_length(num_frames(a.size(), {}), {});
  const Signal ya = istft(stft(a), len);
  const Signal yb = istft(stft(b), len);
  const Signal ys = istft(stft(sum), len);
  for (std::size_t i = 0; i < len; ++i) CHECK(std::abs(ys[i] - ya[i] - yb[i]) < 1e-6);

  Spectrogram sa = stft(a);
  const Spectrogram scaled{sa.bins * 2.5, sa.config};
  CHECK((stft(a).bins * 2.5 - scaled.bins).cwiseAbs().maxCoeff() == 0.0);
  const Signal y25 = istft(scaled, len);
  for (std::size_t i = 0; i < len; ++i) CHECK(std::abs(y25[i] - 2.5 * ya[i]) < 1e-6);
}

TEST_CASE("apply_mask elementwise oracle") {
  const Spectrogram x = stft(gaussian(5000, 5));
  const Matrix ones = Matrix::Ones(x.num_bins(), x.num_frames());
  CHECK((apply_mask(ones, x).bins - x.bins).cwiseAbs().maxCoeff() == 0.0);
  CHECK(apply_mask(Matrix::Zero(x.num_bins(), x.num_frames()), x).bins.cwiseAbs().maxCoeff() ==
        0.0);
  const Spectrogram half = apply_mask(0.5 * ones, x);
  for (Eigen::Index t = 0; t < x.bins.cols(); ++t)
    for (Eigen::Index k = 0; k < x.bins.rows(); ++k) {
      CHECK(std::abs(half.bins(k, t)) == doctest::Approx(0.5 * std::abs(x.bins(k, t))));
      if (std::abs(x.bins(k, t)) > 1e-9)
        CHECK(std::arg(half.bins(k, t)) == doctest::Approx(std::arg(x.bins(k, t))));
    }
  CHECK_THROWS_AS(apply_mask(Matrix::Ones(512, x.num_frames()), x), Error);
}

TEST_CASE("identity mask reproduces the mixture") {
  const Signal x = gaussian(20000, 6);
  const Spectrogram s = stft(x);
  const std::size_t len = covered_length(s.num_frames(), s.config);
  const Signal y = istft(apply_mask(Matrix::Ones(s.num_bins(), s.num_frames()), s), len);
  const SampleRange r = interior_range(len, s.config);
  CHECK(max_abs_diff(x, y, r.begin, r.end) < 1e-6);
}

TEST_CASE("masked reconstruction stays bounded at the edges") {
  // A band mask around a tone must recover the tone everywhere, including the
  // first and last frames where the window sum is tiny.
  Signal x(16000);
  const Signal noise = gaussian(x.size(), 7);
  Signal tone(x.size());
  for (std::size_t n = 0; n < x.size(); ++n) {
    tone[n] = std::sin(2.0 * std::numbers::pi * 440.0 * double(n) / 16000.0);
    x[n] = tone[n] + noise[n];
  }
  const Spectrogram s = stft(x);
  Matrix band = Matrix::Zero(s.num_bins(), s.num_frames());
  band.middleRows(26, 5).setOnes();
  const std::size_t len = covered_length(s.num_frames(), s.config);
  const Signal y = istft(apply_mask(band, s), len);
  const Signal ref(tone.begin(), tone.begin() + len);
  CHECK(si_sdr(ref, y) > 10.0);
  double peak = 0.0;
  for (double v : y) peak = std::max(peak, std::abs(v));
  CHECK(peak < 3.0);
}

TEST_CASE("istft_adjoint is the gradient of a linear functional") {
  // L(Y) = <g, istft(Y * X)> is linear in Y, so finite differences are exact.
  StftConfig cfg{64, 16};
  const Signal x = gaussian(400, 8);
  const Spectrogram s = stft(x, cfg);
  const std::size_t len = covered_length(s.num_frames(), cfg);
  const Signal g = gaussian(len, 9);
  const ComplexMatrix adj = istft_adjoint(g, s.num_frames(), cfg);
  const Matrix analytic = (adj.conjugate().cwiseProduct(s.bins)).real();

  Matrix mask = Matrix::Constant(s.num_bins(), s.num_frames(), 0.3);
  auto functional = [&](const Matrix& m) {
    const Signal y = istft(apply_mask(m, s), len);
    double acc = 0.0;
    for (std::size_t i = 0; i < len; ++i) acc += g[i] * y[i];
    return acc;
  };
  const double h = 1e-3;
  for (int k : {0, 1, 7, 31, 32})
    for (int t : {0, 5, s.num_frames() - 1}) {
      Matrix up = mask, down = mask;
      up(k, t) += h;
      down(k, t) -= h;
      const double fd = (functional(up) - functional(down)) / (2 * h);
      CHECK(analytic(k, t) == doctest::Approx(fd).epsilon(1e-7));
    }
}

}  // TEST_SUITE

// Copyright 2026 The SMLE Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <doctest.h>

#include <cmath>
#include <random>

#include "helpers.hpp"
#include "smle/metrics.hpp"

using namespace smle;
using smle::test::gaussian;

namespace {

// SI-SDR through the normalized correlation: rho^2 / (1 - rho^2).
double correlation_oracle(const Signal& s, const Signal& e) {
  double se = 0, ss = 0, ee = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    se += s[i] * e[i];
    ss += s[i] * s[i];
    ee += e[i] * e[i];
  }
  const double rho2 = se * se / (ss * ee);
  return 10.0 * std::log10(rho2 / (1.0 - rho2));
}

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("si_sdr worked examples") {
  const Signal s{1.0, 0.0};
  CHECK(si_sdr(s, Signal{1.0, 0.5}) == doctest::Approx(6.0206).epsilon(1e-5));
  CHECK(si_sdr(s, Signal{2.0, 1.0}) == doctest::Approx(6.0206).epsilon(1e-5));
  CHECK(si_sdr(s, s) == kDbClamp);
  const Signal r = gaussian(100, 1);
  CHECK(si_sdr(r, r) == kDbClamp);
  CHECK(si_sdr(s, Signal{0.0, 0.0}) == -kDbClamp);
  CHECK(si_sdr(s, Signal{0.0, 1.0}) == -kDbClamp);
  CHECK_THROWS_WITH_AS(si_sdr(Signal{0.0, 0.0}, s), doctest::Contains("undefined reference"),
                       Error);
  CHECK_THROWS_AS(si_sdr(s, Signal{1.0}), Error);
}

TEST_CASE("si_sdr agrees with the correlation form") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> noise_level(0.01, 3.0);
  for (int trial = 0; trial < 200; ++trial) {
    const Signal s = gaussian(64 + trial, 1000 + trial);
    const Signal n = gaussian(s.size(), 5000 + trial, noise_level(rng));
    Signal e(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) e[i] = 0.7 * s[i] + n[i];
    CHECK(std::abs(si_sdr(s, e) - correlation_oracle(s, e)) < 1e-6);
  }
}

TEST_CASE("si_sdr is scale invariant, plain SDR is not") {
  const Signal s = gaussian(500, 3);
  const Signal n = gaussian(500, 4, 0.5);
  Signal e(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) e[i] = s[i] + n[i];
  const double base = si_sdr(s, e);
  for (double c : {1e-3, 1.0, 1e3}) {
    Signal scaled = e;
    for (double& v : scaled) v *= c;
    CHECK(si_sdr(s, scaled) == doctest::Approx(base).epsilon(1e-9));
  }
  Signal doubled = e;
  for (double& v : doubled) v *= 2.0;
  CHECK(si_sdr(s, doubled, false) < si_sdr(s, e, false));
}

TEST_CASE("si_sdr gradient matches finite differences") {
  const Signal s = gaussian(40, 5);
  Signal e = gaussian(40, 6, 0.8);
  for (std::size_t i = 0; i < e.size(); ++i) e[i] += s[i];
  Signal grad(e.size());
  const double value = si_sdr_with_grad(s, e, grad);
  CHECK(value == si_sdr(s, e));
  const double h = 1e-5;
  for (std::size_t i = 0; i < e.size(); ++i) {
    Signal up = e, down = e;
    up[i] += h;
    down[i] -= h;
    const double fd = (si_sdr(s, up) - si_sdr(s, down)) / (2 * h);
    CHECK(grad[i] == doctest::Approx(fd).epsilon(1e-5));
  }
  // Clamped values have no gradient.
  Signal g2(s.size());
  CHECK(si_sdr_with_grad(s, s, g2) == kDbClamp);
  for (double v : g2) CHECK(v == 0.0);
}

TEST_CASE("si_sdr_improvement") {
  const Signal s = gaussian(300, 7);
  const Signal n = gaussian(300, 8);
  Signal x(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) x[i] = s[i] + n[i];
  CHECK(si_sdr_improvement(s, x, x) == 0.0);
  CHECK(si_sdr_improvement(s, x, s) == doctest::Approx(kDbClamp - si_sdr(s, x)));
  CHECK_THROWS_AS(si_sdr_improvement(s, x, Signal(299, 0.0)), Error);
}

TEST_CASE("ideal ratio mask values") {
  Matrix s(1, 3), n(1, 3);
  s << 3.0, 2.0, 0.0;
  n << 4.0, 2.0, 5.0;
  const Matrix m = ideal_ratio_mask(s, n);
  CHECK(m(0, 0) == doctest::Approx(0.6));
  CHECK(m(0, 1) == doctest::Approx(1.0 / std::sqrt(2.0)));
  CHECK(m(0, 2) == 0.0);
  CHECK(ideal_ratio_mask(Matrix::Zero(4, 4), Matrix::Zero(4, 4)).maxCoeff() == 0.0);
  CHECK_THROWS_AS(ideal_ratio_mask(Matrix::Zero(2, 4), Matrix::Zero(4, 4)), Error);
}

TEST_CASE("ideal ratio mask range and monotonicity") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  Matrix s(20, 20), n(20, 20);
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    s(i) = u(rng);
    n(i) = u(rng);
  }
  const Matrix m = ideal_ratio_mask(s, n);
  CHECK(m.minCoeff() >= 0.0);
  CHECK(m.maxCoeff() <= 1.0);
  const Matrix louder = ideal_ratio_mask(s * 1.5, n);
  CHECK((louder - m).minCoeff() >= 0.0);
}

TEST_CASE("bce worked examples") {
  CHECK(bce_loss(std::vector{1 - 1e-7, 1e-7}, std::vector{1.0, 0.0}) < 1e-6);
  CHECK(bce_loss(std::vector{0.5, 0.5}, std::vector{1.0, 0.0}) ==
        doctest::Approx(2.0 * std::log(2.0)));
  CHECK(bce_loss(std::vector{0.25, 0.25, 0.25, 0.25}, one_hot(2, 4)) ==
        doctest::Approx(-std::log(0.25) - 3.0 * std::log(0.75)));
  CHECK(bce_loss(std::vector{0.25, 0.25, 0.25, 0.25}, one_hot(2, 4)) ==
        doctest::Approx(2.2493).epsilon(1e-4));
  // Clamped away from log(0).
  CHECK(std::isfinite(bce_loss(std::vector{0.0, 1.0}, std::vector{1.0, 0.0})));
  CHECK_THROWS_AS(bce_loss(std::vector{0.5, 0.5}, std::vector{0.5, 0.5}), Error);
  CHECK_THROWS_AS(bce_loss(std::vector{0.5, 0.5}, std::vector{1.0, 1.0}), Error);
  CHECK_THROWS_AS(bce_loss(std::vector{0.5, 0.5}, std::vector{1.0}), Error);
}

TEST_CASE("bce gradient matches finite differences") {
  const std::vector<double> p{0.2, 0.5, 0.1, 0.2};
  const std::vector<double> t = one_hot(1, 4);
  const std::vector<double> g = bce_grad(p, t);
  const double h = 1e-6;
  for (std::size_t k = 0; k < p.size(); ++k) {
    auto up = p, down = p;
    up[k] += h;
    down[k] -= h;
    CHECK(g[k] == doctest::Approx((bce_loss(up, t) - bce_loss(down, t)) / (2 * h)).epsilon(1e-6));
  }
}

}  // TEST_SUITE

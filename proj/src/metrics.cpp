// Copyright 2026 The SMLE Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "smle/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace smle {
namespace {

struct Energies {
  double cross = 0.0;  // <s_hat, s>
  double ref = 0.0;    // <s, s>
  double est = 0.0;    // <s_hat, s_hat>
};

Energies energies(std::span<const double> s, std::span<const double> s_hat) {
  if (s.size() != s_hat.size())
    throw Error("si_sdr: length mismatch (" + std::to_string(s.size()) +
                " vs " + std::to_string(s_hat.size()) + ")");
  if (s.empty()) throw Error("si_sdr: empty signals");
  Energies e;
  for (std::size_t i = 0; i < s.size(); ++i) {
    e.cross += s_hat[i] * s[i];
    e.ref += s[i] * s[i];
    e.est += s_hat[i] * s_hat[i];
  }
  if (e.ref <= 0.0) throw Error("si_sdr: undefined reference (zero energy)");
  return e;
}

double clamp_db(double v) {
  if (std::isnan(v)) return -kDbClamp;
  return std::clamp(v, -kDbClamp, kDbClamp);
}

}  // namespace

double si_sdr(std::span<const double> s, std::span<const double> s_hat,
              bool scale_invariant) {
  const Energies e = energies(s, s_hat);
  const double alpha = scale_invariant ? e.cross / e.ref : 1.0;
  double target = 0.0;
  double residual = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double scaled = alpha * s[i];
    target += scaled * scaled;
    const double r = scaled - s_hat[i];
    residual += r * r;
  }
  if (target <= 0.0) return -kDbClamp;
  if (residual <= 0.0) return kDbClamp;
  return clamp_db(10.0 * std::log10(target / residual));
}

double si_sdr_with_grad(std::span<const double> s,
                        std::span<const double> s_hat, std::span<double> grad) {
  if (grad.size() != s.size()) throw Error("si_sdr_with_grad: bad grad size");
  std::fill(grad.begin(), grad.end(), 0.0);
  const double value = si_sdr(s, s_hat, true);
  if (std::abs(value) >= kDbClamp) return value;
  // With a = <s_hat,s>, b = <s,s>, c = <s_hat,s_hat>:
  // si_sdr = 10/ln10 * (2 ln|a| - ln(b c - a^2)) + const.
  const Energies e = energies(s, s_hat);
  const double det = e.ref * e.est - e.cross * e.cross;
  if (det <= 0.0 || e.cross == 0.0) return value;
  const double k = 10.0 / std::numbers::ln10;
  for (std::size_t i = 0; i < s.size(); ++i) {
    grad[i] = k * (2.0 * s[i] / e.cross -
                   (2.0 * e.ref * s_hat[i] - 2.0 * e.cross * s[i]) / det);
  }
  return value;
}

double si_sdr_improvement(std::span<const double> s, std::span<const double> x,
                          std::span<const double> s_hat) {
  if (x.size() != s.size() || s_hat.size() != s.size())
    throw Error("si_sdr_improvement: length mismatch");
  return si_sdr(s, s_hat, true) - si_sdr(s, x, true);
}

Matrix ideal_ratio_mask(const Matrix& speech, const Matrix& noise) {
  if (speech.rows() != noise.rows() || speech.cols() != noise.cols())
    throw Error("ideal_ratio_mask: shape mismatch");
  const Matrix s2 = speech.array().square();
  const Matrix n2 = noise.array().square();
  return (s2.array() / (s2.array() + n2.array() + kIrmEpsilon)).sqrt().matrix();
}

namespace {

void check_one_hot(std::span<const double> probs, std::span<const double> target) {
  if (probs.size() != target.size() || probs.empty())
    throw Error("bce: probability and target lengths differ");
  int ones = 0;
  for (double t : target) {
    if (t == 1.0)
      ++ones;
    else if (t != 0.0)
      throw Error("bce: target is not one-hot");
  }
  if (ones != 1) throw Error("bce: target is not one-hot");
}

}  // namespace

double bce_loss(std::span<const double> p, std::span<const double> t) {
  check_one_hot(p, t);
  double loss = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    const double q = std::clamp(p[k], kBceClamp, 1.0 - kBceClamp);
    loss -= t[k] * std::log(q) + (1.0 - t[k]) * std::log(1.0 - q);
  }
  return loss;
}

std::vector<double> bce_grad(std::span<const double> p, std::span<const double> t) {
  check_one_hot(p, t);
  std::vector<double> g(p.size(), 0.0);
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (p[k] < kBceClamp || p[k] > 1.0 - kBceClamp) continue;
    g[k] = -t[k] / p[k] + (1.0 - t[k]) / (1.0 - p[k]);
  }
  return g;
}

std::vector<double> one_hot(int index, int size) {
  if (index < 0 || index >= size) throw Error("one_hot: index out of range");
  std::vector<double> v(size, 0.0);
  v[index] = 1.0;
  return v;
}

}  // namespace smle

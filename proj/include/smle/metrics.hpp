// Copyright 2026 The SMLE Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <span>
#include <vector>

#include "smle/common.hpp"

namespace smle {

/// Results in dB are clamped to +/- this value.
inline constexpr double kDbClamp = 100.0;
inline constexpr double kIrmEpsilon = 1e-8;
inline constexpr double kBceClamp = 1e-7;

/// 10 log10(|a s|^2 / |a s - s_hat|^2) with a = <s_hat, s> / <s, s> when
/// scale_invariant, else a = 1. Throws "undefined reference" for a silent s.
double si_sdr(std::span<const double> reference, std::span<const double> estimate,
              bool scale_invariant = true);

/// Same value as si_sdr(reference, estimate, true); also writes
/// d si_sdr / d estimate into `grad` (zero where the clamp is active).
double si_sdr_with_grad(std::span<const double> reference,
                        std::span<const double> estimate,
                        std::span<double> grad);

/// si_sdr(s, s_hat) - si_sdr(s, x).
double si_sdr_improvement(std::span<const double> clean,
                          std::span<const double> mixture,
                          std::span<const double> estimate);

/// sqrt(|S|^2 / (|S|^2 + |N|^2 + eps)), entries in [0, 1].
Matrix ideal_ratio_mask(const Matrix& speech_mag, const Matrix& noise_mag);

/// Elementwise binary cross-entropy summed over the K entries, with p
/// clamped to [1e-7, 1 - 1e-7]. The target must be one-hot.
double bce_loss(std::span<const double> probs, std::span<const double> target);

/// Gradient of bce_loss with respect to probs.
std::vector<double> bce_grad(std::span<const double> probs,
                             std::span<const double> target);

std::vector<double> one_hot(int index, int size);

}  // namespace smle

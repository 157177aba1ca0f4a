// Copyright 2026 The SMLE Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <cmath>

#include "smle/neural.hpp"

namespace smle {

AdamState::AdamState(std::size_t size, AdamConfig cfg)
    : config(cfg),
      first_moment(Vector::Zero(static_cast<Eigen::Index>(size))),
      second_moment(Vector::Zero(static_cast<Eigen::Index>(size))) {}

void adam_step(Vector& params, const Vector& grads, AdamState& state) {
  if (params.size() != grads.size() || params.size() != state.first_moment.size() ||
      params.size() != state.second_moment.size())
    throw Error("adam_step: shape mismatch between parameters, gradients and state");
  const AdamConfig& c = state.config;
  ++state.step;
  const double correction1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
  const double correction2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
  for (Eigen::Index i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    double& m = state.first_moment[i];
    double& v = state.second_moment[i];
    m = c.beta1 * m + (1.0 - c.beta1) * g;
    v = c.beta2 * v + (1.0 - c.beta2) * g * g;
    const double m_hat = m / correction1;
    const double v_hat = v / correction2;
    const double updated = params[i] - c.learning_rate * m_hat / (std::sqrt(v_hat) + c.epsilon);
    params[i] = static_cast<double>(static_cast<float>(updated));
  }
}

}  // namespace smle

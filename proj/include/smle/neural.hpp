// Copyright 2026 The SMLE Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Trainable network core: a stack of unidirectional LSTM layers followed by
// one dense layer, with hand-written reverse-mode gradients (full BPTT) and
// Adam.
//
// Parameters live in one flat vector so optimizers and checkpoints can treat
// a network as a single tensor list. Every stored parameter is kept exactly
// representable as a 32-bit float; arithmetic runs in double.

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "smle/common.hpp"

namespace smle {

enum class OutputActivation {
  kSigmoid,        // per-frame mask head
  kScaledSoftmax,  // sequence-level gate head
};

std::string to_string(OutputActivation activation);
OutputActivation parse_activation(const std::string& name);

struct Topology {
  int input_dim = 513;
  std::vector<int> hidden;
  int output_dim = 513;
  OutputActivation activation = OutputActivation::kSigmoid;

  void validate() const;
  bool operator==(const Topology&) const = default;
};

struct Complexity {
  std::size_t params = 0;
  /// Multiply-accumulates per input frame. The gate's dense head runs once
  /// per sequence and is not counted per frame.
  std::size_t macs_per_frame = 0;

  Complexity& operator+=(const Complexity& other) {
    params += other.params;
    macs_per_frame += other.macs_per_frame;
    return *this;
  }
};

/// 4h(d + h + 1) per LSTM layer plus out * (h + 1) for the dense head.
Complexity complexity(const Topology& topology);
inline std::size_t param_count(const Topology& topology) {
  return complexity(topology).params;
}

struct TensorInfo {
  std::string name;
  std::string role;
  int rows = 0;
  int cols = 0;
  std::size_t offset = 0;

  std::size_t size() const { return static_cast<std::size_t>(rows) * cols; }
};

struct LayerState {
  Vector h;
  Vector c;
};
using StackState = std::vector<LayerState>;

/// Per-layer activations recorded by a forward pass for use by backward.
struct LstmLayerCache {
  Matrix input;      // d x T
  Matrix gates;      // 4h x T, activated (i, f, g, o)
  Matrix cell;       // h x T
  Matrix cell_tanh;  // h x T
  Matrix hidden;     // h x T
  Vector h0;
  Vector c0;
};

struct ForwardCache {
  std::vector<LstmLayerCache> layers;
  Matrix output;  // sigmoid mask (out x T) or logits (out x 1)
};

class Network {
 public:
  Network() = default;
  /// Uniform(-1/sqrt(fan), 1/sqrt(fan)) weights, zero biases except a +1
  /// forget-gate bias.
  Network(Topology topology, std::uint64_t seed);

  static Network zeros(Topology topology);

  const Topology& topology() const { return topology_; }
  const std::vector<TensorInfo>& tensors() const { return tensors_; }
  Vector& params() { return params_; }
  const Vector& params() const { return params_; }
  std::size_t param_count() const { return static_cast<std::size_t>(params_.size()); }
  int num_layers() const { return static_cast<int>(topology_.hidden.size()); }

  Eigen::Map<Matrix> tensor(std::size_t index);
  Eigen::Map<const Matrix> tensor(std::size_t index) const;
  Eigen::Map<const Matrix> lstm_weight(int layer) const { return tensor(2 * layer); }
  Eigen::Map<const Vector> lstm_bias(int layer) const;
  Eigen::Map<const Matrix> dense_weight() const { return tensor(2 * num_layers()); }
  Eigen::Map<const Vector> dense_bias() const;

  /// Rounds every parameter to the nearest float.
  void round_to_float();

  /// Runs the LSTM stack over input (input_dim x T) and returns the top
  /// layer's hidden sequence. `initial` may be null (zero state).
  Matrix lstm_forward(const Matrix& input, const StackState* initial,
                      StackState* final_state, ForwardCache* cache) const;
  /// Accumulates parameter gradients into `grad` for dL/d(top hidden).
  void lstm_backward(const ForwardCache& cache, const Matrix& grad_hidden,
                     Vector& grad) const;

  /// Sigmoid head applied per frame: returns output_dim x T in [0, 1].
  Matrix forward_frames(const Matrix& input, ForwardCache* cache,
                        const StackState* initial = nullptr,
                        StackState* final_state = nullptr) const;
  void backward_frames(const ForwardCache& cache, const Matrix& grad_output,
                       Vector& grad) const;

  /// Dense head applied to the final frame's top hidden state: logits.
  Vector forward_sequence(const Matrix& input, ForwardCache* cache) const;
  void backward_sequence(const ForwardCache& cache, const Vector& grad_logits,
                         Vector& grad) const;

 private:
  explicit Network(Topology topology);

  Topology topology_;
  std::vector<TensorInfo> tensors_;
  Vector params_;
};

/// Softmax of lambda * logits, shifted by the max for stability.
struct GateVector {
  std::vector<double> probs;
  std::vector<double> logits;
  double lambda = 1.0;

  /// Lowest index among maxima.
  int argmax() const;
};

GateVector scaled_softmax(std::span<const double> logits, double lambda);
/// dL/d logits given dL/d probs.
std::vector<double> scaled_softmax_backward(const GateVector& gate,
                                            std::span<const double> grad_probs);

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  AdamState() = default;
  AdamState(std::size_t size, AdamConfig cfg = {});

  AdamConfig config;
  Vector first_moment;
  Vector second_moment;
  std::int64_t step = 0;
};

/// Bias-corrected Adam update; the result is rounded to float precision.
void adam_step(Vector& params, const Vector& grads, AdamState& state);

}  // namespace smle

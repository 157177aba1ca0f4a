// Copyright 2026 The SMLE Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <algorithm>
#include <cmath>
#include <random>

#include "smle/neural.hpp"

namespace smle {
namespace {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

std::string to_string(OutputActivation activation) {
  switch (activation) {
    case OutputActivation::kSigmoid:
      return "sigmoid";
    case OutputActivation::kScaledSoftmax:
      return "scaled_softmax";
  }
  return "unknown";
}

OutputActivation parse_activation(const std::string& name) {
  if (name == "sigmoid") return OutputActivation::kSigmoid;
  if (name == "scaled_softmax") return OutputActivation::kScaledSoftmax;
  throw Error("unknown output activation '" + name + "'");
}

void Topology::validate() const {
  if (input_dim < 1) throw Error("topology: input_dim must be positive");
  if (output_dim < 1) throw Error("topology: output_dim must be positive");
  for (int h : hidden)
    if (h < 1) throw Error("topology: hidden sizes must be positive");
  if (activation == OutputActivation::kScaledSoftmax && output_dim < 2)
    throw Error("topology: a softmax head needs at least two outputs");
}

Complexity complexity(const Topology& topology) {
  topology.validate();
  Complexity c;
  std::size_t in = topology.input_dim;
  for (int hidden : topology.hidden) {
    const std::size_t h = hidden;
    c.params += 4 * h * (in + h + 1);
    c.macs_per_frame += 4 * h * (in + h);
    in = h;
  }
  c.params += topology.output_dim * (in + 1);
  if (topology.activation == OutputActivation::kSigmoid)
    c.macs_per_frame += topology.output_dim * in;
  return c;
}

Network::Network(Topology topology) : topology_(std::move(topology)) {
  topology_.validate();
  if (topology_.hidden.empty()) throw Error("topology: at least one LSTM layer required");
  std::size_t offset = 0;
  auto add = [&](std::string name, std::string role, int rows, int cols) {
    tensors_.push_back({std::move(name), std::move(role), rows, cols, offset});
    offset += static_cast<std::size_t>(rows) * cols;
  };
  int in = topology_.input_dim;
  for (int l = 0; l < num_layers(); ++l) {
    const int h = topology_.hidden[l];
    const std::string prefix = "lstm" + std::to_string(l);
    add(prefix + ".weight", "lstm_weight", 4 * h, in + h);
    add(prefix + ".bias", "lstm_bias", 4 * h, 1);
    in = h;
  }
  add("dense.weight", "dense_weight", topology_.output_dim, in);
  add("dense.bias", "dense_bias", topology_.output_dim, 1);
  params_ = Vector::Zero(static_cast<Eigen::Index>(offset));
}

Network Network::zeros(Topology topology) { return Network(std::move(topology)); }

Network::Network(Topology topology, std::uint64_t seed)
    : Network(std::move(topology)) {
  std::mt19937_64 rng(seed);
  for (int l = 0; l < num_layers(); ++l) {
    const int h = topology_.hidden[l];
    const double bound = 1.0 / std::sqrt(static_cast<double>(h));
    std::uniform_real_distribution<double> dist(-bound, bound);
    auto w = tensor(2 * l);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = dist(rng);
    auto b = tensor(2 * l + 1);
    b.setZero();
    b.block(h, 0, h, 1).setOnes();
  }
  const int fan_in = topology_.hidden.back();
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  auto w = tensor(2 * num_layers());
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = dist(rng);
  round_to_float();
}

Eigen::Map<Matrix> Network::tensor(std::size_t index) {
  const TensorInfo& t = tensors_.at(index);
  return {params_.data() + t.offset, t.rows, t.cols};
}

Eigen::Map<const Matrix> Network::tensor(std::size_t index) const {
  const TensorInfo& t = tensors_.at(index);
  return {params_.data() + t.offset, t.rows, t.cols};
}

Eigen::Map<const Vector> Network::lstm_bias(int layer) const {
  const TensorInfo& t = tensors_.at(2 * layer + 1);
  return {params_.data() + t.offset, t.rows};
}

Eigen::Map<const Vector> Network::dense_bias() const {
  const TensorInfo& t = tensors_.at(2 * num_layers() + 1);
  return {params_.data() + t.offset, t.rows};
}

void Network::round_to_float() {
  for (Eigen::Index i = 0; i < params_.size(); ++i)
    params_[i] = static_cast<double>(static_cast<float>(params_[i]));
}

Matrix Network::lstm_forward(const Matrix& input, const StackState* initial,
                             StackState* final_state,
                             ForwardCache* cache) const {
  if (input.rows() != topology_.input_dim)
    throw Error("lstm_forward: input has " + std::to_string(input.rows()) +
                " rows, network expects " + std::to_string(topology_.input_dim));
  if (input.cols() < 1) throw Error("lstm_forward: empty sequence");
  if (initial && static_cast<int>(initial->size()) != num_layers())
    throw Error("lstm_forward: initial state has wrong layer count");

  const Eigen::Index frames = input.cols();
  if (cache) cache->layers.assign(num_layers(), {});
  if (final_state) final_state->assign(num_layers(), {});

  Matrix current = input;
  for (int l = 0; l < num_layers(); ++l) {
    const int h = topology_.hidden[l];
    const int d = static_cast<int>(current.rows());
    const auto w = lstm_weight(l);
    const auto b = lstm_bias(l);

    Matrix z = w.leftCols(d) * current;
    z.colwise() += b;

    Vector h_prev = Vector::Zero(h);
    Vector c_prev = Vector::Zero(h);
    if (initial) {
      const LayerState& s = (*initial)[l];
      if (s.h.size() != h || s.c.size() != h)
        throw Error("lstm_forward: initial state size mismatch");
      h_prev = s.h;
      c_prev = s.c;
    }
    const Vector h0 = h_prev;
    const Vector c0 = c_prev;

    Matrix gates(4 * h, frames);
    Matrix cell(h, frames);
    Matrix cell_tanh(h, frames);
    Matrix hidden(h, frames);
    const auto wh = w.rightCols(h);
    Vector zt(4 * h);
    for (Eigen::Index t = 0; t < frames; ++t) {
      zt.noalias() = z.col(t);
      zt.noalias() += wh * h_prev;
      for (int k = 0; k < h; ++k) {
        const double ig = sigmoid(zt[k]);
        const double fg = sigmoid(zt[h + k]);
        const double gg = std::tanh(zt[2 * h + k]);
        const double og = sigmoid(zt[3 * h + k]);
        const double c = fg * c_prev[k] + ig * gg;
        const double tc = std::tanh(c);
        gates(k, t) = ig;
        gates(h + k, t) = fg;
        gates(2 * h + k, t) = gg;
        gates(3 * h + k, t) = og;
        cell(k, t) = c;
        cell_tanh(k, t) = tc;
        hidden(k, t) = og * tc;
      }
      h_prev = hidden.col(t);
      c_prev = cell.col(t);
    }
    if (final_state) (*final_state)[l] = {h_prev, c_prev};
    if (cache) {
      LstmLayerCache& lc = cache->layers[l];
      lc.input = std::move(current);
      lc.gates = std::move(gates);
      lc.cell = std::move(cell);
      lc.cell_tanh = std::move(cell_tanh);
      lc.hidden = hidden;
      lc.h0 = h0;
      lc.c0 = c0;
    }
    current = std::move(hidden);
  }
  return current;
}

void Network::lstm_backward(const ForwardCache& cache, const Matrix& grad_hidden,
                            Vector& grad) const {
  if (static_cast<int>(cache.layers.size()) != num_layers())
    throw Error("lstm_backward: cache does not match network");
  if (grad.size() != params_.size())
    throw Error("lstm_backward: gradient buffer has wrong size");

  Matrix upstream = grad_hidden;
  for (int l = num_layers() - 1; l >= 0; --l) {
    const LstmLayerCache& lc = cache.layers[l];
    const int h = topology_.hidden[l];
    const int d = static_cast<int>(lc.input.rows());
    const Eigen::Index frames = lc.hidden.cols();
    if (upstream.rows() != h || upstream.cols() != frames)
      throw Error("lstm_backward: upstream gradient shape mismatch");
    const auto w = lstm_weight(l);
    const auto wh = w.rightCols(h);

    Matrix dz(4 * h, frames);
    Vector dh_next = Vector::Zero(h);
    Vector dc_next = Vector::Zero(h);
    for (Eigen::Index t = frames - 1; t >= 0; --t) {
      for (int k = 0; k < h; ++k) {
        const double ig = lc.gates(k, t);
        const double fg = lc.gates(h + k, t);
        const double gg = lc.gates(2 * h + k, t);
        const double og = lc.gates(3 * h + k, t);
        const double tc = lc.cell_tanh(k, t);
        const double c_prev = t > 0 ? lc.cell(k, t - 1) : lc.c0[k];
        const double dh = upstream(k, t) + dh_next[k];
        const double dc = dh * og * (1.0 - tc * tc) + dc_next[k];
        dz(k, t) = dc * gg * ig * (1.0 - ig);
        dz(h + k, t) = dc * c_prev * fg * (1.0 - fg);
        dz(2 * h + k, t) = dc * ig * (1.0 - gg * gg);
        dz(3 * h + k, t) = dh * tc * og * (1.0 - og);
        dc_next[k] = dc * fg;
      }
      dh_next.noalias() = wh.transpose() * dz.col(t);
    }

    const TensorInfo& wi = tensors_[2 * l];
    const TensorInfo& bi = tensors_[2 * l + 1];
    Eigen::Map<Matrix> dw(grad.data() + wi.offset, wi.rows, wi.cols);
    Eigen::Map<Vector> db(grad.data() + bi.offset, bi.rows);
    dw.leftCols(d).noalias() += dz * lc.input.transpose();
    dw.rightCols(h).noalias() += dz.col(0) * lc.h0.transpose();
    if (frames > 1)
      dw.rightCols(h).noalias() +=
          dz.rightCols(frames - 1) * lc.hidden.leftCols(frames - 1).transpose();
    db += dz.rowwise().sum();

    if (l > 0) upstream = w.leftCols(d).transpose() * dz;
  }
}

Matrix Network::forward_frames(const Matrix& input, ForwardCache* cache,
                               const StackState* initial,
                               StackState* final_state) const {
  if (topology_.activation != OutputActivation::kSigmoid)
    throw Error("forward_frames: network does not have a per-frame head");
  const Matrix hidden = lstm_forward(input, initial, final_state, cache);
  Matrix out = dense_weight() * hidden;
  out.colwise() += dense_bias();
  out = out.unaryExpr([](double v) { return sigmoid(v); });
  if (cache) cache->output = out;
  return out;
}

void Network::backward_frames(const ForwardCache& cache,
                              const Matrix& grad_output, Vector& grad) const {
  if (grad_output.rows() != cache.output.rows() ||
      grad_output.cols() != cache.output.cols())
    throw Error("backward_frames: gradient shape mismatch");
  const Matrix& y = cache.output;
  const Matrix dpre = grad_output.cwiseProduct(
      y.unaryExpr([](double v) { return v * (1.0 - v); }));
  const Matrix& hidden = cache.layers.back().hidden;
  const TensorInfo& wi = tensors_[2 * num_layers()];
  const TensorInfo& bi = tensors_[2 * num_layers() + 1];
  Eigen::Map<Matrix> dw(grad.data() + wi.offset, wi.rows, wi.cols);
  Eigen::Map<Vector> db(grad.data() + bi.offset, bi.rows);
  dw.noalias() += dpre * hidden.transpose();
  db += dpre.rowwise().sum();
  const Matrix dhidden = dense_weight().transpose() * dpre;
  lstm_backward(cache, dhidden, grad);
}

Vector Network::forward_sequence(const Matrix& input, ForwardCache* cache) const {
  if (topology_.activation != OutputActivation::kScaledSoftmax)
    throw Error("forward_sequence: network does not have a sequence head");
  const Matrix hidden = lstm_forward(input, nullptr, nullptr, cache);
  Vector logits = dense_weight() * hidden.col(hidden.cols() - 1) + dense_bias();
  if (cache) cache->output = logits;
  return logits;
}

void Network::backward_sequence(const ForwardCache& cache,
                                const Vector& grad_logits, Vector& grad) const {
  if (grad_logits.size() != topology_.output_dim)
    throw Error("backward_sequence: gradient size mismatch");
  const Matrix& hidden = cache.layers.back().hidden;
  const Eigen::Index last = hidden.cols() - 1;
  const TensorInfo& wi = tensors_[2 * num_layers()];
  const TensorInfo& bi = tensors_[2 * num_layers() + 1];
  Eigen::Map<Matrix> dw(grad.data() + wi.offset, wi.rows, wi.cols);
  Eigen::Map<Vector> db(grad.data() + bi.offset, bi.rows);
  dw.noalias() += grad_logits * hidden.col(last).transpose();
  db += grad_logits;
  Matrix dhidden = Matrix::Zero(hidden.rows(), hidden.cols());
  dhidden.col(last) = dense_weight().transpose() * grad_logits;
  lstm_backward(cache, dhidden, grad);
}

int GateVector::argmax() const {
  if (probs.empty()) throw Error("GateVector::argmax: empty gate");
  int best = 0;
  for (int k = 1; k < static_cast<int>(probs.size()); ++k)
    if (probs[k] > probs[best]) best = k;
  return best;
}

GateVector scaled_softmax(std::span<const double> logits, double lambda) {
  if (logits.size() < 2) throw Error("scaled_softmax: need at least two logits");
  if (!(lambda > 0.0)) throw Error("scaled_softmax: lambda must be positive");
  GateVector gate;
  gate.lambda = lambda;
  gate.logits.assign(logits.begin(), logits.end());
  const double m = lambda * *std::max_element(logits.begin(), logits.end());
  gate.probs.resize(logits.size());
  double total = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    gate.probs[k] = std::exp(lambda * logits[k] - m);
    total += gate.probs[k];
  }
  for (double& p : gate.probs) p /= total;
  return gate;
}

std::vector<double> scaled_softmax_backward(const GateVector& gate,
                                            std::span<const double> grad_probs) {
  if (grad_probs.size() != gate.probs.size())
    throw Error("scaled_softmax_backward: size mismatch");
  double dot = 0.0;
  for (std::size_t k = 0; k < gate.probs.size(); ++k)
    dot += grad_probs[k] * gate.probs[k];
  std::vector<double> out(gate.probs.size());
  for (std::size_t k = 0; k < gate.probs.size(); ++k)
    out[k] = gate.lambda * gate.probs[k] * (grad_probs[k] - dot);
  return out;
}

}  // namespace smle

// Copyright 2026 The SMLE Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <cmath>
#include <limits>

#include "parallel.hpp"
#include "smle/metrics.hpp"
#include "smle/pipeline.hpp"

namespace smle {
namespace {

using nlohmann::json;

// Seed streams; each training task draws from its own.
constexpr std::uint64_t kBaselineStream = 9;
constexpr std::uint64_t kSpecialistStream = 10;  // + cluster
constexpr std::uint64_t kGateStream = 20;
constexpr std::uint64_t kFinetuneStream = 30;

std::uint64_t batch_seed(std::uint64_t seed, std::uint64_t stream, int step) {
  return mix_seed(seed, stream * 1000003ULL + static_cast<std::uint64_t>(step));
}

BatchSpec base_spec(const TrainConfig& config) {
  BatchSpec spec;
  spec.size = config.batch_size;
  spec.snr_levels = config.snr_levels;
  spec.latent = config.latent;
  spec.seconds = config.snippet_seconds;
  return spec;
}

void restrict_to_cluster(BatchSpec& spec, const TrainConfig& config, int cluster) {
  if (config.latent == Latent::kSnr)
    spec.fixed_snr = config.snr_levels.at(cluster);
  else
    spec.gender = cluster == 0 ? Gender::kMale : Gender::kFemale;
}

std::vector<PreparedSample> prepare_batch(const Batch& batch, const StftConfig& stft) {
  std::vector<PreparedSample> out;
  out.reserve(batch.samples.size());
  for (const MixtureSample& m : batch.samples) out.push_back(prepare_sample(m, stft));
  return out;
}

std::vector<PreparedSample> validation_set(const AudioBank& bank, BatchSpec spec,
                                           const TrainConfig& config,
                                           std::uint64_t stream) {
  spec.split = Split::kValidation;
  spec.size = config.validation_size;
  spec.seed = mix_seed(config.seed, 700 + stream);
  return prepare_batch(sample_batch(bank, spec), config.stft);
}

double masked_improvement(const PreparedSample& p, const Matrix& mask) {
  return si_sdr_improvement(p.clean, p.noisy, masked_estimate(p, mask));
}

void check_finite(double loss, const std::string& task, int step) {
  if (!std::isfinite(loss))
    throw Error(task + ": training diverged at step " + std::to_string(step) +
                " (loss is " + std::to_string(loss) +
                "); lower the learning rate or check the corpus for silent files");
}

// Shared validation / early-stopping bookkeeping. Returns true when
// training should stop.
struct Stopper {
  TrainHistory& history;
  int patience;
  int stale = 0;

  bool record(int step, double metric) {
    history.validation_steps.push_back(step);
    history.validation.push_back(metric);
    if (history.validation.size() == 1 || metric > history.best_validation) {
      history.best_validation = metric;
      history.best_step = step;
      stale = 0;
      return false;
    }
    ++stale;
    return stale >= patience;
  }
};

template <typename Fn>
double mean_over(int n, int threads, Fn&& fn) {
  std::vector<double> values(std::max(1, threads));
  double total = 0.0;
  detail::ordered_parallel(
      n, threads, [&](int i, int slot) { values[slot] = fn(i); },
      [&](int, int slot) { total += values[slot]; });
  return total / n;
}

}  // namespace

void TrainConfig::validate() const {
  if (hidden.empty() || gate_hidden.empty()) throw Error("config: empty architecture");
  for (int h : hidden)
    if (h < 1) throw Error("config: hidden sizes must be positive");
  for (int h : gate_hidden)
    if (h < 1) throw Error("config: gate hidden sizes must be positive");
  if (batch_size < 1) throw Error("config: batch_size must be positive");
  if (!(learning_rate > 0.0)) throw Error("config: learning_rate must be positive");
  if (!(lambda > 0.0)) throw Error("config: lambda must be positive");
  if (max_steps < 0) throw Error("config: max_steps must be non-negative");
  if (validate_every < 1) throw Error("config: validate_every must be positive");
  if (patience < 1) throw Error("config: patience must be positive");
  if (validation_size < 1) throw Error("config: validation_size must be positive");
  if (snr_levels.empty()) throw Error("config: snr_levels is empty");
  if (!(snippet_seconds > 0.0)) throw Error("config: snippet_seconds must be positive");
  if (threads < 1) throw Error("config: threads must be positive");
  stft.validate();
}

int TrainConfig::clusters() const {
  return latent == Latent::kSnr ? static_cast<int>(snr_levels.size()) : 2;
}

json TrainHistory::to_json() const {
  return {{"task", task},
          {"loss", loss},
          {"validation_steps", validation_steps},
          {"validation", validation},
          {"best_step", best_step},
          {"best_validation", best_validation},
          {"early_stopped", early_stopped}};
}

PreparedSample prepare_sample(const MixtureSample& sample, const StftConfig& config) {
  PreparedSample p;
  p.mixture = stft(sample.x, config);
  p.magnitude = magnitude(p.mixture);
  p.length = covered_length(p.mixture.num_frames(), config);
  p.scored = interior_range(p.length, config);
  if (p.scored.begin >= p.scored.end) p.scored = {0, p.length};
  p.clean.assign(sample.s.begin() + p.scored.begin, sample.s.begin() + p.scored.end);
  p.noisy.assign(sample.x.begin() + p.scored.begin, sample.x.begin() + p.scored.end);
  p.label = sample.cluster_label;
  return p;
}

Signal masked_estimate(const PreparedSample& p, const Matrix& mask) {
  const Signal full = istft(apply_mask(mask, p.mixture), p.length);
  return Signal(full.begin() + p.scored.begin, full.begin() + p.scored.end);
}

namespace {

// dL/dY for L = -si_sdr(s, istft(Y * X)); returns L.
double mask_gradient(const PreparedSample& p, const Matrix& mask, Matrix* grad_mask) {
  const Signal estimate = masked_estimate(p, mask);
  Signal grad_est(estimate.size());
  const double loss = -si_sdr_with_grad(p.clean, estimate, grad_est);
  if (grad_mask) {
    Signal grad_signal(p.length, 0.0);
    for (std::size_t i = 0; i < grad_est.size(); ++i)
      grad_signal[p.scored.begin + i] = -grad_est[i];
    const ComplexMatrix g = istft_adjoint(grad_signal, p.mixture.num_frames(), p.mixture.config);
    // d/dY of Re(conj(G) * Y X) = Re(conj(G) X).
    grad_mask->resize(g.rows(), g.cols());
    for (Eigen::Index i = 0; i < g.size(); ++i)
      (*grad_mask)(i) = g(i).real() * p.mixture.bins(i).real() +
                        g(i).imag() * p.mixture.bins(i).imag();
  }
  return loss;
}

}  // namespace

double mask_loss(const Network& network, const PreparedSample& p, Vector* grad) {
  ForwardCache cache;
  const Matrix mask = network.forward_frames(input_features(p.magnitude),
                                             grad ? &cache : nullptr);
  if (!grad) return mask_gradient(p, mask, nullptr);
  Matrix grad_mask;
  const double loss = mask_gradient(p, mask, &grad_mask);
  network.backward_frames(cache, grad_mask, *grad);
  return loss;
}

double gate_loss(const GatingModel& gate, const Matrix& magnitude, int label, Vector* grad) {
  ForwardCache cache;
  const GateVector p = gate.gate(magnitude, grad ? &cache : nullptr);
  const std::vector<double> target = one_hot(label, gate.clusters());
  const double loss = bce_loss(p.probs, target);
  if (grad) {
    const std::vector<double> dp = bce_grad(p.probs, target);
    const std::vector<double> dlogits = scaled_softmax_backward(p, dp);
    gate.network.backward_sequence(
        cache, Eigen::Map<const Vector>(dlogits.data(), dlogits.size()), *grad);
  }
  return loss;
}

double ensemble_loss(const EnsembleModel& e, const PreparedSample& p, EnsembleGrads* grads) {
  e.validate();
  const int k_count = e.clusters();
  ForwardCache gate_cache;
  const GateVector gate = e.gate.gate(p.magnitude, grads ? &gate_cache : nullptr);
  const Matrix features = input_features(p.magnitude);
  std::vector<ForwardCache> caches(k_count);
  std::vector<Matrix> masks(k_count);
  for (int k = 0; k < k_count; ++k)
    masks[k] = e.specialists[k].network.forward_frames(features, grads ? &caches[k] : nullptr);
  const Matrix mask = combine_masks(masks, gate.probs);
  if (!grads) return mask_gradient(p, mask, nullptr);

  Matrix grad_mask;
  const double loss = mask_gradient(p, mask, &grad_mask);
  std::vector<double> grad_probs(k_count);
  for (int k = 0; k < k_count; ++k) {
    grad_probs[k] = grad_mask.cwiseProduct(masks[k]).sum();
    e.specialists[k].network.backward_frames(caches[k], gate.probs[k] * grad_mask,
                                             grads->specialists[k]);
  }
  const std::vector<double> dlogits = scaled_softmax_backward(gate, grad_probs);
  e.gate.network.backward_sequence(
      gate_cache, Eigen::Map<const Vector>(dlogits.data(), dlogits.size()), grads->gate);
  return loss;
}

SpecialistTraining train_specialist(const TrainConfig& config, const AudioBank& bank,
                                    std::optional<int> cluster) {
  config.validate();
  const int k_count = config.clusters();
  if (cluster && (*cluster < 0 || *cluster >= k_count))
    throw Error("cluster " + std::to_string(*cluster) + " out of range [0, " +
                std::to_string(k_count) + ")");
  const auto labels = cluster_labels(config.latent, config.snr_levels);
  const std::uint64_t stream =
      cluster ? kSpecialistStream + static_cast<std::uint64_t>(*cluster) : kBaselineStream;

  BatchSpec spec = base_spec(config);
  if (cluster) restrict_to_cluster(spec, config, *cluster);

  SpecialistTraining out{
      SpecialistModel::create(config.hidden, config.stft.bins(), cluster.value_or(-1),
                              cluster ? labels[*cluster] : "all",
                              mix_seed(config.seed, 200 + stream)),
      {}};
  TrainHistory& history = out.history;
  history.task = cluster ? "specialist:" + labels[*cluster] : "baseline";
  Network& net = out.model.network;

  const std::vector<PreparedSample> val = validation_set(bank, spec, config, stream);
  auto validate = [&] {
    return mean_over(static_cast<int>(val.size()), config.threads, [&](int i) {
      return masked_improvement(val[i], out.model.mask(val[i].magnitude));
    });
  };

  AdamState adam(net.param_count(), {config.learning_rate});
  Stopper stopper{history, config.patience};
  Vector best = net.params();
  std::vector<Vector> slots(config.threads, Vector::Zero(net.params().size()));
  std::vector<double> slot_loss(config.threads);

  for (int step = 0; step < config.max_steps; ++step) {
    if (step % config.validate_every == 0) {
      const bool stop = stopper.record(step, validate());
      if (history.best_step == step) best = net.params();
      if (stop) {
        history.early_stopped = true;
        break;
      }
    }
    spec.seed = batch_seed(config.seed, stream, step);
    const std::vector<PreparedSample> batch =
        prepare_batch(sample_batch(bank, spec), config.stft);
    Vector grad = Vector::Zero(net.params().size());
    double loss = 0.0;
    detail::ordered_parallel(
        static_cast<int>(batch.size()), config.threads,
        [&](int i, int slot) {
          slots[slot].setZero();
          slot_loss[slot] = mask_loss(net, batch[i], &slots[slot]);
        },
        [&](int, int slot) {
          grad += slots[slot];
          loss += slot_loss[slot];
        });
    loss /= batch.size();
    check_finite(loss, history.task, step);
    grad /= static_cast<double>(batch.size());
    history.loss.push_back(loss);
    adam_step(net.params(), grad, adam);
  }
  if (!history.early_stopped) {
    stopper.record(static_cast<int>(history.loss.size()), validate());
    if (history.best_step == static_cast<int>(history.loss.size())) best = net.params();
  }
  net.params() = best;
  return out;
}

GatingTraining train_gating(const TrainConfig& config, const AudioBank& bank) {
  config.validate();
  const int k_count = config.clusters();
  BatchSpec spec = base_spec(config);

  GatingTraining out{GatingModel::create(config.gate_hidden, config.stft.bins(), k_count,
                                         config.lambda,
                                         mix_seed(config.seed, 200 + kGateStream)),
                     {},
                     {}};
  TrainHistory& history = out.history;
  history.task = "gate:" + to_string(config.latent);
  Network& net = out.model.network;

  const std::vector<PreparedSample> val = validation_set(bank, spec, config, kGateStream);
  std::vector<double> per_class;
  auto validate = [&] {
    std::vector<int> chosen(val.size());
    detail::ordered_parallel(
        static_cast<int>(val.size()), config.threads,
        [&](int i, int) { chosen[i] = out.model.gate(val[i].magnitude).argmax(); },
        [](int, int) {});
    std::vector<int> hits(k_count, 0), totals(k_count, 0);
    int correct = 0;
    for (std::size_t i = 0; i < val.size(); ++i) {
      ++totals[val[i].label];
      if (chosen[i] == val[i].label) {
        ++hits[val[i].label];
        ++correct;
      }
    }
    per_class.assign(k_count, 0.0);
    for (int k = 0; k < k_count; ++k)
      per_class[k] = totals[k] ? static_cast<double>(hits[k]) / totals[k] : 0.0;
    return static_cast<double>(correct) / val.size();
  };

  AdamState adam(net.param_count(), {config.learning_rate});
  Stopper stopper{history, config.patience};
  Vector best = net.params();
  std::vector<Vector> slots(config.threads, Vector::Zero(net.params().size()));
  std::vector<double> slot_loss(config.threads);

  auto snapshot = [&](int step) {
    if (history.best_step == step) {
      best = net.params();
      out.validation_accuracy = per_class;
    }
  };
  for (int step = 0; step < config.max_steps; ++step) {
    if (step % config.validate_every == 0) {
      const bool stop = stopper.record(step, validate());
      snapshot(step);
      if (stop) {
        history.early_stopped = true;
        break;
      }
    }
    spec.seed = batch_seed(config.seed, kGateStream, step);
    const Batch batch = sample_batch(bank, spec);
    Vector grad = Vector::Zero(net.params().size());
    double loss = 0.0;
    detail::ordered_parallel(
        static_cast<int>(batch.samples.size()), config.threads,
        [&](int i, int slot) {
          const MixtureSample& m = batch.samples[i];
          slots[slot].setZero();
          slot_loss[slot] = gate_loss(out.model, magnitude(stft(m.x, config.stft)),
                                      m.cluster_label, &slots[slot]);
        },
        [&](int, int slot) {
          grad += slots[slot];
          loss += slot_loss[slot];
        });
    loss /= batch.samples.size();
    check_finite(loss, history.task, step);
    grad /= static_cast<double>(batch.samples.size());
    history.loss.push_back(loss);
    adam_step(net.params(), grad, adam);
  }
  if (!history.early_stopped) {
    const int step = static_cast<int>(history.loss.size());
    stopper.record(step, validate());
    snapshot(step);
  }
  net.params() = best;
  return out;
}

EnsembleModel assemble_ensemble(std::vector<SpecialistModel> specialists, GatingModel gate,
                                Latent latent, std::vector<std::string> labels) {
  EnsembleModel e;
  e.specialists = std::move(specialists);
  e.gate = std::move(gate);
  e.mode = GatingMode::kHard;
  e.latent = to_string(latent);
  e.cluster_labels = std::move(labels);
  e.validate();
  for (int k = 0; k < e.clusters(); ++k)
    if (e.specialists[k].cluster_id != k)
      throw Error("ensemble: specialist " + std::to_string(k) + " was trained for cluster " +
                  std::to_string(e.specialists[k].cluster_id));
  return e;
}

EnsembleTraining finetune_ensemble(const TrainConfig& config, EnsembleModel ensemble,
                                   const AudioBank& bank) {
  config.validate();
  ensemble.validate();
  if (ensemble.clusters() != config.clusters())
    throw Error("finetune: ensemble has " + std::to_string(ensemble.clusters()) +
                " specialists but the config defines " + std::to_string(config.clusters()) +
                " clusters");
  ensemble.gate.lambda = config.lambda;
  const int k_count = ensemble.clusters();
  BatchSpec spec = base_spec(config);

  EnsembleTraining out{std::move(ensemble), {}};
  EnsembleModel& e = out.model;
  TrainHistory& history = out.history;
  history.task = "finetune:" + to_string(config.latent);

  const std::vector<PreparedSample> val = validation_set(bank, spec, config, kFinetuneStream);
  auto validate = [&] {
    return mean_over(static_cast<int>(val.size()), config.threads, [&](int i) {
      return masked_improvement(val[i], e.hard_mask(val[i].magnitude).mask);
    });
  };
  auto snapshot_params = [&] {
    std::vector<Vector> p;
    for (const auto& s : e.specialists) p.push_back(s.network.params());
    p.push_back(e.gate.network.params());
    return p;
  };

  std::vector<AdamState> adams;
  for (const auto& s : e.specialists)
    adams.emplace_back(s.network.param_count(), AdamConfig{config.learning_rate});
  adams.emplace_back(e.gate.network.param_count(), AdamConfig{config.learning_rate});

  auto zero_grads = [&] {
    EnsembleGrads g;
    for (const auto& s : e.specialists) g.specialists.push_back(Vector::Zero(s.network.param_count()));
    g.gate = Vector::Zero(e.gate.network.param_count());
    return g;
  };
  std::vector<EnsembleGrads> slots(config.threads, zero_grads());
  std::vector<double> slot_loss(config.threads);

  Stopper stopper{history, config.patience};
  std::vector<Vector> best = snapshot_params();
  for (int step = 0; step < config.max_steps; ++step) {
    if (step % config.validate_every == 0) {
      const bool stop = stopper.record(step, validate());
      if (history.best_step == step) best = snapshot_params();
      if (stop) {
        history.early_stopped = true;
        break;
      }
    }
    spec.seed = batch_seed(config.seed, kFinetuneStream, step);
    const std::vector<PreparedSample> batch =
        prepare_batch(sample_batch(bank, spec), config.stft);
    EnsembleGrads total = zero_grads();
    double loss = 0.0;
    detail::ordered_parallel(
        static_cast<int>(batch.size()), config.threads,
        [&](int i, int slot) {
          for (Vector& g : slots[slot].specialists) g.setZero();
          slots[slot].gate.setZero();
          slot_loss[slot] = ensemble_loss(e, batch[i], &slots[slot]);
        },
        [&](int, int slot) {
          for (int k = 0; k < k_count; ++k) total.specialists[k] += slots[slot].specialists[k];
          total.gate += slots[slot].gate;
          loss += slot_loss[slot];
        });
    loss /= batch.size();
    check_finite(loss, history.task, step);
    history.loss.push_back(loss);
    const double scale = 1.0 / static_cast<double>(batch.size());
    for (int k = 0; k < k_count; ++k)
      adam_step(e.specialists[k].network.params(), total.specialists[k] * scale, adams[k]);
    adam_step(e.gate.network.params(), total.gate * scale, adams[k_count]);
  }
  if (!history.early_stopped) {
    const int step = static_cast<int>(history.loss.size());
    stopper.record(step, validate());
    if (history.best_step == step) best = snapshot_params();
  }
  for (int k = 0; k < k_count; ++k) e.specialists[k].network.params() = best[k];
  e.gate.network.params() = best[k_count];
  e.mode = GatingMode::kHard;
  return out;
}

}  // namespace smle

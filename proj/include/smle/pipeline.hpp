// Copyright 2026 The SMLE Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Training loops and the evaluation harness.
//
// Specialists and baselines minimize -SI-SDR of istft(M * X) against the
// clean snippet; gates minimize BCE between the scaled softmax and the
// one-hot cluster label; fine-tuning minimizes -SI-SDR through the soft
// (probability-weighted) ensemble mask with gradients into every member.

#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "smle/data.hpp"
#include "smle/dsp.hpp"
#include "smle/models.hpp"

namespace smle {

struct TrainConfig {
  std::vector<int> hidden = {16, 16};
  std::vector<int> gate_hidden = {16, 16};
  int batch_size = 100;
  double learning_rate = 1e-3;
  double lambda = 10.0;
  int max_steps = 1000;
  int validate_every = 50;
  int patience = 10;
  int validation_size = 100;
  Latent latent = Latent::kSnr;
  std::vector<double> snr_levels = kDefaultSnrLevels;
  double snippet_seconds = 1.0;
  StftConfig stft;
  std::uint64_t seed = 0;
  int threads = 1;

  void validate() const;
  int clusters() const;
};

struct TrainHistory {
  std::string task;
  std::vector<double> loss;  // mean batch loss per step
  std::vector<int> validation_steps;
  std::vector<double> validation;  // higher is better
  int best_step = 0;
  double best_validation = 0.0;
  bool early_stopped = false;

  nlohmann::json to_json() const;
};

/// One mixture ready for the loss: STFT of x plus the clean and noisy
/// references cut to the scored range. Scoring uses the fully overlapped
/// interior, where an all-ones mask reproduces x exactly; signals too short to
/// have one fall back to every reconstructed sample.
struct PreparedSample {
  Spectrogram mixture;
  Matrix magnitude;
  Signal clean;
  Signal noisy;
  SampleRange scored;
  std::size_t length = 0;  // istft output length
  int label = -1;
};
PreparedSample prepare_sample(const MixtureSample& sample, const StftConfig& config);

/// istft(mask * X) cut to p.scored.
Signal masked_estimate(const PreparedSample& p, const Matrix& mask);

/// -si_sdr(s, istft(mask(|X|) * X)) for a sigmoid-head network; adds the
/// parameter gradient to *grad when non-null.
double mask_loss(const Network& network, const PreparedSample& sample, Vector* grad);

/// BCE(scaled_softmax(gate(|X|), lambda), one_hot(label)).
double gate_loss(const GatingModel& gate, const Matrix& magnitude, int label,
                 Vector* grad);

struct EnsembleGrads {
  std::vector<Vector> specialists;
  Vector gate;
};
/// -SI-SDR through the soft ensemble mask; gradients for all members.
double ensemble_loss(const EnsembleModel& ensemble, const PreparedSample& sample,
                     EnsembleGrads* grads);

struct SpecialistTraining {
  SpecialistModel model;
  TrainHistory history;
};
/// cluster == nullopt trains the generalist baseline on every cluster.
SpecialistTraining train_specialist(const TrainConfig& config, const AudioBank& bank,
                                    std::optional<int> cluster);

struct GatingTraining {
  GatingModel model;
  TrainHistory history;
  std::vector<double> validation_accuracy;  // per cluster, at the best step
};
GatingTraining train_gating(const TrainConfig& config, const AudioBank& bank);

struct EnsembleTraining {
  EnsembleModel model;
  TrainHistory history;
};
/// Joint fine-tuning with soft gating; the returned model is in hard mode.
EnsembleTraining finetune_ensemble(const TrainConfig& config, EnsembleModel ensemble,
                                   const AudioBank& bank);

/// Pre-trained members combined without joint training.
EnsembleModel assemble_ensemble(std::vector<SpecialistModel> specialists,
                                GatingModel gate, Latent latent,
                                std::vector<std::string> labels);

struct EvalModels {
  std::vector<std::pair<std::string, SpecialistModel>> denoisers;
  std::vector<std::pair<std::string, EnsembleModel>> ensembles;
  std::vector<std::pair<std::string, GatingModel>> gates;
  bool oracle_irm = true;
  bool identity = true;
};

struct ModelRow {
  std::string name;
  std::string kind;
  std::vector<double> per_snr;  // mean SI-SDRi per SNR level
  std::vector<int> counts;
  double mean = 0.0;
  std::size_t learned_params = 0;
  std::size_t active_params = 0;
  std::size_t learned_macs_per_frame = 0;
  std::size_t active_macs_per_frame = 0;
};

struct GateStats {
  std::string name;
  Eigen::MatrixXi confusion;  // rows: true cluster, cols: chosen
  double accuracy = 0.0;
  std::vector<double> per_class_accuracy;
};

struct EvalReport {
  std::vector<double> snr_levels;
  std::string latent;
  std::vector<std::string> cluster_labels;
  int n_mixtures = 0;
  std::vector<ModelRow> rows;
  std::vector<GateStats> gates;

  const ModelRow& row(const std::string& name) const;
  const GateStats& gate(const std::string& name) const;
  nlohmann::json to_json() const;
  std::string to_table() const;
};

/// Averages per-mixture SI-SDRi (dB) over the given mixtures. Ensembles add
/// a hard-gated row, an oracle-routed row ("<name>/oracle") and gate stats.
EvalReport evaluate(const EvalModels& models, const std::vector<MixtureSample>& mixtures,
                    const TrainConfig& config);

/// Draws n_mixtures full-duration test mixtures and evaluates them.
EvalReport evaluate(const EvalModels& models, const AudioBank& bank, int n_mixtures,
                    const TrainConfig& config, std::uint64_t seed);

}  // namespace smle

// Copyright 2026 The SMLE Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Specialist, gating, and ensemble denoisers built from the network core.

#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "smle/checkpoint.hpp"
#include "smle/dsp.hpp"
#include "smle/neural.hpp"

namespace smle {

/// Log compression keeps speech harmonics and the noise floor in one range;
/// the scale brings unit-RMS inputs to order-one features so the uniform
/// LSTM init does not start with saturated gates.
inline constexpr double kFeatureScale = 0.125;

/// Network input computed from a magnitude spectrogram: log(1 + |X|) / 8.
Matrix input_features(const Matrix& magnitude);

/// Maps a mask-producing network onto one latent cluster. cluster_id < 0
/// marks a generalist (baseline) trained on every cluster.
struct SpecialistModel {
  Network network;
  int cluster_id = -1;
  std::string label;

  static SpecialistModel create(const std::vector<int>& hidden, int bins,
                                int cluster_id, std::string label,
                                std::uint64_t seed);

  /// bins x T mask in [0, 1].
  Matrix mask(const Matrix& magnitude, ForwardCache* cache = nullptr) const;
  Complexity complexity() const { return smle::complexity(network.topology()); }
};

struct GatingModel {
  Network network;
  double lambda = 10.0;

  static GatingModel create(const std::vector<int>& hidden, int bins,
                            int clusters, double lambda, std::uint64_t seed);

  int clusters() const { return network.topology().output_dim; }
  /// Reads the whole sequence and emits one probability vector.
  GateVector gate(const Matrix& magnitude, ForwardCache* cache = nullptr) const;
  Complexity complexity() const { return smle::complexity(network.topology()); }
};

enum class GatingMode { kSoft, kHard };

/// Request-local instrumentation of how many networks actually ran.
struct EvalCounter {
  int specialist_forwards = 0;
  int gate_forwards = 0;
};

struct HardMask {
  Matrix mask;
  int chosen = 0;
  GateVector gate;
};

struct EnsembleModel {
  std::vector<SpecialistModel> specialists;
  GatingModel gate;
  GatingMode mode = GatingMode::kHard;
  std::string latent;
  std::vector<std::string> cluster_labels;

  void validate() const;
  int clusters() const { return static_cast<int>(specialists.size()); }

  /// Y = sum_k p_k M^(k); every specialist runs.
  Matrix soft_mask(const Matrix& magnitude, GateVector* gate_out = nullptr,
                   EvalCounter* counter = nullptr) const;
  /// Y = M^(k*), k* = argmax p (lowest index on ties); only specialist k*
  /// runs. The gate reads the first `gate_frames` frames (all when <= 0).
  HardMask hard_mask(const Matrix& magnitude, int gate_frames = 0,
                     EvalCounter* counter = nullptr) const;

  /// All learned parameters: every specialist plus the gate.
  Complexity learned_complexity() const;
  /// Parameters touched per inference in the current mode.
  Complexity active_complexity() const;
};

/// Convex combination sum_k weights[k] * masks[k], accumulated in index order.
Matrix combine_masks(std::span<const Matrix> masks, std::span<const double> weights);

/// Debug model whose mask is all ones.
struct IdentityModel {};

using Denoiser = std::variant<IdentityModel, SpecialistModel, EnsembleModel>;

struct DenoiseReport {
  int chosen = -1;
  std::vector<double> gate_probs;
  std::size_t active_params = 0;
  std::size_t learned_params = 0;
  std::size_t active_macs_per_frame = 0;
};

struct DenoiseResult {
  Signal estimate;
  DenoiseReport report;
};

/// stft -> mask -> apply_mask -> istft over the whole input. Ensembles gate
/// on the first second of audio and run the chosen specialist over all
/// frames. Output length equals input length; samples past the last full
/// frame are zero.
DenoiseResult denoise(const Denoiser& model, std::span<const double> mixture,
                      const StftConfig& config = {},
                      EvalCounter* counter = nullptr);

/// Checkpoint conversion for every model kind.
Checkpoint to_checkpoint(const Denoiser& model, const StftConfig& config = {});
Checkpoint to_checkpoint(const GatingModel& gate, const StftConfig& config = {});

struct LoadedModel {
  std::variant<IdentityModel, SpecialistModel, EnsembleModel, GatingModel> model;
  StftConfig stft;
};
LoadedModel from_checkpoint(const Checkpoint& checkpoint);

void save_model(const std::filesystem::path& path, const Denoiser& model,
                const StftConfig& config = {});
void save_model(const std::filesystem::path& path, const GatingModel& gate,
                const StftConfig& config = {});
LoadedModel load_model(const std::filesystem::path& path);

/// Denoiser view of a loaded model; throws for a gate-only checkpoint.
Denoiser as_denoiser(const LoadedModel& loaded);

}  // namespace smle

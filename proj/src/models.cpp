// Copyright 2026 The SMLE Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "smle/models.hpp"

#include <algorithm>
#include <cmath>

namespace smle {
namespace {

using nlohmann::json;

json stft_json(const StftConfig& c) {
  return {{"frame_size", c.frame_size}, {"hop", c.hop}};
}

StftConfig stft_from_json(const json& meta) {
  StftConfig c;
  if (meta.contains("stft")) {
    c.frame_size = meta["stft"].at("frame_size").get<int>();
    c.hop = meta["stft"].at("hop").get<int>();
  }
  c.validate();
  return c;
}

const std::string kFeatures = "log1p_magnitude/8";

}  // namespace

Matrix input_features(const Matrix& magnitude) {
  return (magnitude.array().log1p() * kFeatureScale).matrix();
}

SpecialistModel SpecialistModel::create(const std::vector<int>& hidden, int bins,
                                        int cluster_id, std::string label,
                                        std::uint64_t seed) {
  Topology t{bins, hidden, bins, OutputActivation::kSigmoid};
  return {Network(t, seed), cluster_id, std::move(label)};
}

Matrix SpecialistModel::mask(const Matrix& magnitude, ForwardCache* cache) const {
  return network.forward_frames(input_features(magnitude), cache);
}

GatingModel GatingModel::create(const std::vector<int>& hidden, int bins,
                                int clusters, double lambda, std::uint64_t seed) {
  if (!(lambda > 0.0)) throw Error("gating lambda must be positive");
  Topology t{bins, hidden, clusters, OutputActivation::kScaledSoftmax};
  return {Network(t, seed), lambda};
}

GateVector GatingModel::gate(const Matrix& magnitude, ForwardCache* cache) const {
  const Vector logits = network.forward_sequence(input_features(magnitude), cache);
  return scaled_softmax(std::span(logits.data(), logits.size()), lambda);
}

void EnsembleModel::validate() const {
  if (specialists.size() < 2) throw Error("ensemble needs at least two specialists");
  if (gate.clusters() != clusters())
    throw Error("ensemble: gate has " + std::to_string(gate.clusters()) +
                " outputs for " + std::to_string(clusters()) + " specialists");
  const Topology& first = specialists.front().network.topology();
  for (const SpecialistModel& s : specialists) {
    const Topology& t = s.network.topology();
    if (t.input_dim != first.input_dim || t.output_dim != first.output_dim)
      throw Error("ensemble: specialists disagree on input/output dims");
  }
  if (gate.network.topology().input_dim != first.input_dim)
    throw Error("ensemble: gate input dim differs from specialists");
}

Matrix combine_masks(std::span<const Matrix> masks, std::span<const double> weights) {
  if (masks.empty() || masks.size() != weights.size())
    throw Error("combine_masks: need one weight per mask");
  Matrix out = Matrix::Zero(masks[0].rows(), masks[0].cols());
  for (std::size_t k = 0; k < masks.size(); ++k) {
    if (masks[k].rows() != out.rows() || masks[k].cols() != out.cols())
      throw Error("combine_masks: mask shapes differ");
    out += weights[k] * masks[k];
  }
  return out;
}

Matrix EnsembleModel::soft_mask(const Matrix& magnitude, GateVector* gate_out,
                                EvalCounter* counter) const {
  validate();
  GateVector p = gate.gate(magnitude);
  std::vector<Matrix> masks;
  masks.reserve(specialists.size());
  for (const SpecialistModel& s : specialists) masks.push_back(s.mask(magnitude));
  if (counter) {
    counter->gate_forwards += 1;
    counter->specialist_forwards += clusters();
  }
  Matrix y = combine_masks(masks, p.probs);
  if (gate_out) *gate_out = std::move(p);
  return y;
}

HardMask EnsembleModel::hard_mask(const Matrix& magnitude, int gate_frames,
                                  EvalCounter* counter) const {
  validate();
  const Eigen::Index frames =
      gate_frames > 0 ? std::min<Eigen::Index>(gate_frames, magnitude.cols())
                      : magnitude.cols();
  GateVector p = gate.gate(magnitude.leftCols(frames));
  const int chosen = p.argmax();
  HardMask out{specialists[chosen].mask(magnitude), chosen, std::move(p)};
  if (counter) {
    counter->gate_forwards += 1;
    counter->specialist_forwards += 1;
  }
  return out;
}

Complexity EnsembleModel::learned_complexity() const {
  Complexity c = gate.complexity();
  for (const SpecialistModel& s : specialists) c += s.complexity();
  return c;
}

Complexity EnsembleModel::active_complexity() const {
  if (mode == GatingMode::kSoft) return learned_complexity();
  Complexity c = gate.complexity();
  // All specialists share a topology, so any one stands for the chosen one.
  c += specialists.front().complexity();
  return c;
}

DenoiseResult denoise(const Denoiser& model, std::span<const double> mixture,
                      const StftConfig& config, EvalCounter* counter) {
  for (double v : mixture)
    if (!std::isfinite(v)) throw Error("denoise: input contains non-finite samples");
  const Spectrogram spec = stft(mixture, config);
  const Matrix mag = magnitude(spec);

  DenoiseResult result;
  Matrix mask;
  if (std::holds_alternative<IdentityModel>(model)) {
    mask = Matrix::Ones(mag.rows(), mag.cols());
  } else if (const auto* s = std::get_if<SpecialistModel>(&model)) {
    mask = s->mask(mag);
    if (counter) counter->specialist_forwards += 1;
    const Complexity c = s->complexity();
    result.report.active_params = result.report.learned_params = c.params;
    result.report.active_macs_per_frame = c.macs_per_frame;
  } else {
    const auto& e = std::get<EnsembleModel>(model);
    if (e.mode == GatingMode::kHard) {
      const std::size_t first_second =
          std::min<std::size_t>(mixture.size(), static_cast<std::size_t>(kSampleRate));
      const int gate_frames = first_second >= static_cast<std::size_t>(config.frame_size)
                                  ? num_frames(first_second, config)
                                  : static_cast<int>(mag.cols());
      HardMask hm = e.hard_mask(mag, gate_frames, counter);
      mask = std::move(hm.mask);
      result.report.chosen = hm.chosen;
      result.report.gate_probs = std::move(hm.gate.probs);
    } else {
      GateVector p;
      mask = e.soft_mask(mag, &p, counter);
      result.report.chosen = p.argmax();
      result.report.gate_probs = std::move(p.probs);
    }
    const Complexity active = e.active_complexity();
    result.report.active_params = active.params;
    result.report.active_macs_per_frame = active.macs_per_frame;
    result.report.learned_params = e.learned_complexity().params;
  }
  result.estimate = istft(apply_mask(mask, spec), mixture.size());
  return result;
}

Checkpoint to_checkpoint(const Denoiser& model, const StftConfig& config) {
  Checkpoint cp;
  cp.meta = {{"stft", stft_json(config)}, {"features", kFeatures}};
  if (std::holds_alternative<IdentityModel>(model)) {
    cp.kind = "identity";
  } else if (const auto* s = std::get_if<SpecialistModel>(&model)) {
    cp.kind = "specialist";
    cp.meta["cluster_id"] = s->cluster_id;
    cp.meta["label"] = s->label;
    cp.networks.push_back({"specialist", s->network});
  } else {
    const auto& e = std::get<EnsembleModel>(model);
    e.validate();
    cp.kind = "ensemble";
    json checksums = json::object();
    json members = json::array();
    for (int k = 0; k < e.clusters(); ++k) {
      const std::string name = "specialist" + std::to_string(k);
      cp.networks.push_back({name, e.specialists[k].network});
      checksums[name] = network_checksum(e.specialists[k].network);
      members.push_back({{"name", name},
                         {"cluster_id", e.specialists[k].cluster_id},
                         {"label", e.specialists[k].label}});
    }
    cp.networks.push_back({"gate", e.gate.network});
    checksums["gate"] = network_checksum(e.gate.network);
    cp.meta["ensemble"] = {{"K", e.clusters()},
                           {"lambda", e.gate.lambda},
                           {"latent", e.latent},
                           {"cluster_labels", e.cluster_labels},
                           {"mode", e.mode == GatingMode::kHard ? "hard" : "soft"},
                           {"members", members},
                           {"member_checksums", checksums}};
  }
  return cp;
}

Checkpoint to_checkpoint(const GatingModel& gate, const StftConfig& config) {
  Checkpoint cp;
  cp.kind = "gating";
  cp.meta = {{"stft", stft_json(config)},
             {"features", kFeatures},
             {"lambda", gate.lambda},
             {"K", gate.clusters()}};
  cp.networks.push_back({"gate", gate.network});
  return cp;
}

LoadedModel from_checkpoint(const Checkpoint& cp) {
  LoadedModel out;
  out.stft = stft_from_json(cp.meta);
  if (cp.meta.contains("features") && cp.meta["features"] != kFeatures)
    throw Error("checkpoint uses unsupported features '" +
                cp.meta["features"].get<std::string>() + "'");
  try {
    if (cp.kind == "identity") {
      out.model = IdentityModel{};
    } else if (cp.kind == "specialist") {
      out.model = SpecialistModel{cp.network("specialist"),
                                  cp.meta.value("cluster_id", -1),
                                  cp.meta.value("label", std::string())};
    } else if (cp.kind == "gating") {
      out.model = GatingModel{cp.network("gate"), cp.meta.at("lambda").get<double>()};
    } else if (cp.kind == "ensemble") {
      const json& m = cp.meta.at("ensemble");
      EnsembleModel e;
      const int k = m.at("K").get<int>();
      const json& checksums = m.at("member_checksums");
      for (int i = 0; i < k; ++i) {
        const std::string name = "specialist" + std::to_string(i);
        const json& member = m.at("members").at(i);
        e.specialists.push_back({cp.network(name), member.at("cluster_id").get<int>(),
                                 member.at("label").get<std::string>()});
        if (checksums.at(name) != network_checksum(e.specialists.back().network))
          throw Error("checkpoint: checksum mismatch for " + name);
      }
      e.gate = {cp.network("gate"), m.at("lambda").get<double>()};
      if (checksums.at("gate") != network_checksum(e.gate.network))
        throw Error("checkpoint: checksum mismatch for gate");
      e.latent = m.at("latent").get<std::string>();
      e.cluster_labels = m.at("cluster_labels").get<std::vector<std::string>>();
      e.mode = m.at("mode") == "soft" ? GatingMode::kSoft : GatingMode::kHard;
      e.validate();
      out.model = std::move(e);
    } else {
      throw Error("checkpoint: unknown model kind '" + cp.kind + "'");
    }
  } catch (const json::exception& ex) {
    throw Error(std::string("checkpoint: malformed model metadata: ") + ex.what());
  }
  return out;
}

void save_model(const std::filesystem::path& path, const Denoiser& model,
                const StftConfig& config) {
  save_checkpoint(path, to_checkpoint(model, config));
}

void save_model(const std::filesystem::path& path, const GatingModel& gate,
                const StftConfig& config) {
  save_checkpoint(path, to_checkpoint(gate, config));
}

LoadedModel load_model(const std::filesystem::path& path) {
  return from_checkpoint(load_checkpoint(path));
}

Denoiser as_denoiser(const LoadedModel& loaded) {
  return std::visit(
      [](const auto& m) -> Denoiser {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, GatingModel>)
          throw Error("a gating-only checkpoint cannot denoise");
        else
          return m;
      },
      loaded.model);
}

}  // namespace smle

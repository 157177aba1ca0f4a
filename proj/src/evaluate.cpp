// Copyright 2026 The SMLE Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <algorithm>
#include <cstdio>
#include <functional>
#include <sstream>

#include "parallel.hpp"
#include "smle/metrics.hpp"
#include "smle/pipeline.hpp"

namespace smle {
namespace {

using nlohmann::json;

// One evaluated system: a mask for a given test mixture, and optionally a
// gating decision.
struct System {
  ModelRow row;
  std::function<Matrix(const PreparedSample&, const MixtureSample&, int gate_frames, int* chosen)> mask;
  bool gated = false;
};

std::string fmt(double v, int precision = 2) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.*f", precision, v);
  return buf;
}

}  // namespace

const ModelRow& EvalReport::row(const std::string& name) const {
  for (const ModelRow& r : rows)
    if (r.name == name) return r;
  throw Error("report has no row '" + name + "'");
}

const GateStats& EvalReport::gate(const std::string& name) const {
  for (const GateStats& g : gates)
    if (g.name == name) return g;
  throw Error("report has no gate '" + name + "'");
}

json EvalReport::to_json() const {
  json j = {{"snr_levels", snr_levels},
            {"latent", latent},
            {"cluster_labels", cluster_labels},
            {"n_mixtures", n_mixtures},
            {"models", json::array()},
            {"gating", json::array()}};
  for (const ModelRow& r : rows)
    j["models"].push_back({{"name", r.name},
                           {"kind", r.kind},
                           {"per_snr_si_sdri", r.per_snr},
                           {"per_snr_counts", r.counts},
                           {"mean_si_sdri", r.mean},
                           {"learned_params", r.learned_params},
                           {"active_params", r.active_params},
                           {"learned_macs_per_frame", r.learned_macs_per_frame},
                           {"active_macs_per_frame", r.active_macs_per_frame}});
  for (const GateStats& g : gates) {
    json confusion = json::array();
    for (Eigen::Index r = 0; r < g.confusion.rows(); ++r) {
      std::vector<int> row;
      for (Eigen::Index c = 0; c < g.confusion.cols(); ++c) row.push_back(g.confusion(r, c));
      confusion.push_back(row);
    }
    j["gating"].push_back({{"name", g.name},
                           {"accuracy", g.accuracy},
                           {"per_class_accuracy", g.per_class_accuracy},
                           {"confusion", confusion}});
  }
  return j;
}

std::string EvalReport::to_table() const {
  std::ostringstream out;
  std::size_t width = 12;
  for (const ModelRow& r : rows) width = std::max(width, r.name.size() + 2);
  auto pad = [](const std::string& s, std::size_t w) {
    return s.size() >= w ? s : s + std::string(w - s.size(), ' ');
  };
  auto lpad = [](const std::string& s, std::size_t w) {
    return s.size() >= w ? s : std::string(w - s.size(), ' ') + s;
  };
  if (!rows.empty()) {
    out << "SI-SDRi (dB) over " << n_mixtures << " mixtures\n";
    out << pad("model", width);
    for (double snr : snr_levels) out << lpad(fmt(snr, 0) + "dB", 9);
    out << lpad("mean", 9) << lpad("learned", 12) << lpad("active", 12)
        << lpad("MAC/frame", 12) << "\n";
  }
  for (const ModelRow& r : rows) {
    out << pad(r.name, width);
    for (double v : r.per_snr) out << lpad(fmt(v), 9);
    out << lpad(fmt(r.mean), 9) << lpad(std::to_string(r.learned_params), 12)
        << lpad(std::to_string(r.active_params), 12)
        << lpad(std::to_string(r.active_macs_per_frame), 12) << "\n";
  }
  for (const GateStats& g : gates) {
    if (!rows.empty() || &g != &gates.front()) out << "\n";
    out << "gate " << g.name << ": accuracy " << fmt(g.accuracy, 4) << "\n";
    out << pad("true\\chosen", 14);
    for (const std::string& l : cluster_labels) out << lpad(l, 9);
    out << lpad("acc", 9) << "\n";
    for (Eigen::Index r = 0; r < g.confusion.rows(); ++r) {
      out << pad(r < static_cast<Eigen::Index>(cluster_labels.size()) ? cluster_labels[r]
                                                                       : std::to_string(r),
                 14);
      for (Eigen::Index c = 0; c < g.confusion.cols(); ++c)
        out << lpad(std::to_string(g.confusion(r, c)), 9);
      out << lpad(fmt(g.per_class_accuracy[r], 3), 9) << "\n";
    }
  }
  return out.str();
}

EvalReport evaluate(const EvalModels& models, const std::vector<MixtureSample>& mixtures,
                    const TrainConfig& config) {
  config.validate();
  if (mixtures.empty()) throw Error("evaluate: n_mixtures must be at least 1");
  const int levels = static_cast<int>(config.snr_levels.size());
  const int k_count = config.clusters();

  EvalReport report;
  report.snr_levels = config.snr_levels;
  report.latent = to_string(config.latent);
  report.cluster_labels = cluster_labels(config.latent, config.snr_levels);
  report.n_mixtures = static_cast<int>(mixtures.size());

  std::vector<System> systems;
  auto add = [&](std::string name, std::string kind, Complexity learned, Complexity active,
                 auto&& mask_fn, bool gated = false) {
    System s;
    s.row.name = std::move(name);
    s.row.kind = std::move(kind);
    s.row.learned_params = learned.params;
    s.row.active_params = active.params;
    s.row.learned_macs_per_frame = learned.macs_per_frame;
    s.row.active_macs_per_frame = active.macs_per_frame;
    s.mask = mask_fn;
    s.gated = gated;
    systems.push_back(std::move(s));
  };

  if (models.identity)
    add("identity", "identity", {}, {},
        [](const PreparedSample& p, const MixtureSample&, int, int*) {
          return Matrix::Ones(p.magnitude.rows(), p.magnitude.cols()).eval();
        });
  if (models.oracle_irm) {
    add("oracle_irm", "oracle", {}, {},
        [&config](const PreparedSample&, const MixtureSample& m, int, int*) {
          return ideal_ratio_mask(magnitude(stft(m.s, config.stft)),
                                  magnitude(stft(m.n, config.stft)));
        });
  }
  for (const auto& [name, model] : models.denoisers) {
    const SpecialistModel* mp = &model;
    add(name, model.cluster_id < 0 ? "baseline" : "specialist", model.complexity(),
        model.complexity(), [mp](const PreparedSample& p, const MixtureSample&, int, int*) {
          return mp->mask(p.magnitude);
        });
  }
  std::vector<std::string> gate_names;
  for (const auto& [name, model] : models.ensembles) {
    if (model.clusters() != k_count)
      throw Error("evaluate: ensemble '" + name + "' has " + std::to_string(model.clusters()) +
                  " clusters, mixtures are labelled with " + std::to_string(k_count));
    const EnsembleModel* ep = &model;
    add(name, "ensemble", model.learned_complexity(), model.active_complexity(),
        [ep](const PreparedSample& p, const MixtureSample&, int gate_frames, int* chosen) {
          HardMask hm = ep->hard_mask(p.magnitude, gate_frames);
          *chosen = hm.chosen;
          return hm.mask;
        },
        true);
    gate_names.push_back(name);
    Complexity one = model.specialists.front().complexity();
    add(name + "/oracle", "oracle_routing", model.learned_complexity(), one,
        [ep](const PreparedSample& p, const MixtureSample& m, int, int*) {
          return ep->specialists.at(m.cluster_label).mask(p.magnitude);
        });
  }

  const std::size_t count = mixtures.size();
  const std::size_t n_sys = systems.size();
  const std::size_t n_gates = models.gates.size();
  std::vector<double> improvement(count * n_sys, 0.0);
  std::vector<int> chosen(count * (n_sys + n_gates), -1);

  detail::ordered_parallel(
      static_cast<int>(count), config.threads,
      [&](int i, int) {
        const MixtureSample& m = mixtures[i];
        const PreparedSample p = prepare_sample(m, config.stft);
        const std::size_t first_second =
            std::min<std::size_t>(m.x.size(), static_cast<std::size_t>(kSampleRate));
        const int gate_frames = first_second >= static_cast<std::size_t>(config.stft.frame_size)
                                    ? num_frames(first_second, config.stft)
                                    : p.mixture.num_frames();
        for (std::size_t s = 0; s < n_sys; ++s) {
          int pick = -1;
          const Matrix mask = systems[s].mask(p, m, gate_frames, &pick);
          improvement[i * n_sys + s] =
              si_sdr_improvement(p.clean, p.noisy, masked_estimate(p, mask));
          chosen[i * (n_sys + n_gates) + s] = pick;
        }
        for (std::size_t g = 0; g < n_gates; ++g) {
          const Eigen::Index frames = std::min<Eigen::Index>(gate_frames, p.magnitude.cols());
          chosen[i * (n_sys + n_gates) + n_sys + g] =
              models.gates[g].second.gate(p.magnitude.leftCols(frames)).argmax();
        }
      },
      [](int, int) {});

  for (std::size_t s = 0; s < n_sys; ++s) {
    ModelRow row = systems[s].row;
    row.per_snr.assign(levels, 0.0);
    row.counts.assign(levels, 0);
    double total = 0.0;
    for (std::size_t i = 0; i < count; ++i) {
      const double v = improvement[i * n_sys + s];
      const int level = mixtures[i].snr_index;
      if (level >= 0 && level < levels) {
        row.per_snr[level] += v;
        ++row.counts[level];
      }
      total += v;
    }
    for (int l = 0; l < levels; ++l)
      if (row.counts[l]) row.per_snr[l] /= row.counts[l];
    row.mean = total / count;
    report.rows.push_back(std::move(row));
  }

  auto gate_stats = [&](const std::string& name, std::size_t column) {
    GateStats g;
    g.name = name;
    g.confusion = Eigen::MatrixXi::Zero(k_count, k_count);
    for (std::size_t i = 0; i < count; ++i) {
      const int truth = mixtures[i].cluster_label;
      const int pick = chosen[i * (n_sys + n_gates) + column];
      if (truth < 0 || truth >= k_count || pick < 0 || pick >= k_count)
        throw Error("evaluate: mixture " + std::to_string(i) + " has no valid cluster label");
      ++g.confusion(truth, pick);
    }
    g.accuracy = static_cast<double>(g.confusion.trace()) / count;
    for (int k = 0; k < k_count; ++k) {
      const int row_total = g.confusion.row(k).sum();
      g.per_class_accuracy.push_back(row_total ? static_cast<double>(g.confusion(k, k)) / row_total
                                               : 0.0);
    }
    report.gates.push_back(std::move(g));
  };
  for (std::size_t s = 0; s < n_sys; ++s)
    if (systems[s].gated) gate_stats(systems[s].row.name, s);
  for (std::size_t g = 0; g < n_gates; ++g) gate_stats(models.gates[g].first, n_sys + g);
  return report;
}

EvalReport evaluate(const EvalModels& models, const AudioBank& bank, int n_mixtures,
                    const TrainConfig& config, std::uint64_t seed) {
  if (n_mixtures < 1) throw Error("evaluate: n_mixtures must be at least 1");
  const auto mixtures =
      make_test_mixtures(bank, n_mixtures, config.snr_levels, config.latent, seed);
  return evaluate(models, mixtures, config);
}

}  // namespace smle

// Copyright 2026 The SMLE Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "smle/cli.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>

#include <CLI11.hpp>

#include "smle/config.hpp"
#include "smle/models.hpp"
#include "smle/wav.hpp"

namespace smle {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<std::string> latent;
  std::optional<int> steps;

  void attach(CLI::App* app, bool training) {
    app->add_option("--config", config_path, "RunConfig JSON file");
    app->add_option("--seed", seed, "Seed override (beats SMLE_SEED and the config)");
    app->add_option("--threads", threads, "Worker thread cap");
    if (training) {
      app->add_option("--latent", latent, "Latent space: snr or gender");
      app->add_option("--steps", steps, "Override train.max_steps");
    }
  }

  RunConfig load() const {
    RunConfig c = config_path.empty() ? RunConfig::from_json(json::object())
                                      : load_run_config(config_path);
    apply_seed_env(c);
    if (seed) {
      c.train.seed = *seed;
      c.synth.seed = *seed;
    }
    if (threads) c.train.threads = *threads;
    if (latent) c.train.latent = parse_latent(*latent);
    if (steps) c.train.max_steps = *steps;
    c.train.validate();
    return c;
  }
};

AudioBank load_bank(const RunConfig& config) {
  if (config.manifest.empty())
    throw Error("no corpus configured: set corpus.manifest in the config");
  return AudioBank::load(load_manifest(config.manifest));
}

void write_json(const fs::path& path, const json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << j.dump(2) << "\n";
}

void write_history(const fs::path& checkpoint, const TrainHistory& history,
                   const RunConfig& config) {
  json j = history.to_json();
  j["config"] = config.to_json();
  write_json(fs::path(checkpoint.string() + ".history.json"), j);
}

void ensure_parent(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
}

SpecialistModel load_specialist(const fs::path& path) {
  LoadedModel m = load_model(path);
  if (auto* s = std::get_if<SpecialistModel>(&m.model)) return std::move(*s);
  throw Error("'" + path.string() + "' is not a specialist checkpoint");
}

GatingModel load_gate(const fs::path& path) {
  LoadedModel m = load_model(path);
  if (auto* g = std::get_if<GatingModel>(&m.model)) return std::move(*g);
  throw Error("'" + path.string() + "' is not a gating checkpoint");
}

EnsembleModel build_ensemble(const std::vector<std::string>& specialist_paths,
                             const std::string& gate_path, const RunConfig& config) {
  std::vector<SpecialistModel> specialists;
  for (const std::string& p : specialist_paths) specialists.push_back(load_specialist(p));
  std::sort(specialists.begin(), specialists.end(),
            [](const auto& a, const auto& b) { return a.cluster_id < b.cluster_id; });
  return assemble_ensemble(std::move(specialists), load_gate(gate_path), config.train.latent,
                           cluster_labels(config.train.latent, config.train.snr_levels));
}

std::string join_probs(const std::vector<double>& p) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(6) << "[";
  for (std::size_t i = 0; i < p.size(); ++i) s << (i ? ", " : "") << p[i];
  s << "]";
  return s.str();
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Sparse ensemble-of-specialists speech denoising toolkit", "smle"};
  app.require_subcommand(1);

  // synth-corpus
  Common synth_common;
  std::string synth_out;
  std::optional<int> synth_speakers, synth_test_speakers, synth_utts, synth_noises,
      synth_test_noises;
  auto* synth = app.add_subcommand("synth-corpus", "Write a synthetic speech/noise corpus");
  synth_common.attach(synth, false);
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_option("--speakers", synth_speakers, "Training speakers");
  synth->add_option("--test-speakers", synth_test_speakers, "Test speakers");
  synth->add_option("--utterances", synth_utts, "Utterances per speaker");
  synth->add_option("--noises", synth_noises, "Training noise files");
  synth->add_option("--test-noises", synth_test_noises, "Test noise files");

  // ingest
  IngestSpec ingest_spec;
  std::string ingest_out;
  auto* ingest = app.add_subcommand("ingest", "Build a manifest from speech/noise directory trees");
  ingest->add_option("--speech-train", ingest_spec.speech_train, "<root>/<speaker>/**/*.wav")->required();
  ingest->add_option("--noise-train", ingest_spec.noise_train, "<root>/**/*.wav")->required();
  ingest->add_option("--speech-test", ingest_spec.speech_test, "Held-out speakers")->required();
  ingest->add_option("--noise-test", ingest_spec.noise_test, "Held-out noises")->required();
  ingest->add_option("--speakers-file", ingest_spec.speakers_file, "SPEAKERS.TXT with genders");
  ingest->add_option("--seed", ingest_spec.seed, "Validation split seed");
  ingest->add_option("--out", ingest_out, "Manifest path")->required();

  // mix
  Common mix_common;
  std::string mix_out;
  int mix_count = 100;
  std::string mix_split = "test";
  auto* mix = app.add_subcommand("mix", "Write full-duration test mixtures (x, s, n WAVs)");
  mix_common.attach(mix, true);
  mix->add_option("--out", mix_out, "Output directory")->required();
  mix->add_option("--count", mix_count, "Number of mixtures");
  mix->add_option("--split", mix_split, "Corpus split: train, val or test");

  // train-specialist
  Common spec_common;
  std::string spec_cluster;
  std::string spec_out;
  auto* train_spec = app.add_subcommand("train-specialist", "Pre-train one specialist or the baseline");
  spec_common.attach(train_spec, true);
  train_spec->add_option("--cluster", spec_cluster, "Cluster index, or 'baseline'")->required();
  train_spec->add_option("--out", spec_out, "Checkpoint path")->required();

  // train-gate
  Common gate_common;
  std::string gate_out;
  auto* train_gate = app.add_subcommand("train-gate", "Train the gating classifier");
  gate_common.attach(train_gate, true);
  train_gate->add_option("--out", gate_out, "Checkpoint path")->required();

  // assemble / finetune
  Common ens_common;
  std::vector<std::string> ens_specialists;
  std::string ens_gate;
  std::string ens_out;
  std::string ens_naive_out;
  auto* assemble = app.add_subcommand("assemble", "Combine pre-trained members into a naive ensemble");
  auto* finetune = app.add_subcommand("finetune", "Jointly fine-tune specialists and gate (soft gating)");
  for (CLI::App* a : {assemble, finetune}) {
    ens_common.attach(a, true);
    a->add_option("--specialists", ens_specialists, "Specialist checkpoints")
        ->required()
        ->delimiter(',');
    a->add_option("--gate", ens_gate, "Gate checkpoint")->required();
    a->add_option("--out", ens_out, "Ensemble checkpoint path")->required();
  }
  finetune->add_option("--naive-out", ens_naive_out, "Also save the naive ensemble here");

  // denoise
  std::string dn_in, dn_out, dn_model;
  auto* dn = app.add_subcommand("denoise", "Denoise one WAV file");
  dn->add_option("--in", dn_in, "Noisy input WAV")->required();
  dn->add_option("--out", dn_out, "Denoised output WAV")->required();
  dn->add_option("--model", dn_model, "Model checkpoint")->required();

  // evaluate
  Common eval_common;
  std::vector<std::string> eval_models;
  std::string eval_report;
  std::optional<int> eval_mixtures;
  auto* ev = app.add_subcommand("evaluate", "Mean SI-SDRi, gating accuracy and complexity report");
  eval_common.attach(ev, true);
  ev->add_option("--models", eval_models, "name=checkpoint entries")->required();
  ev->add_option("--report", eval_report, "JSON report path")->required();
  ev->add_option("--mixtures", eval_mixtures, "Number of test mixtures");

  // identity-model
  std::string id_out;
  auto* identity = app.add_subcommand("identity-model", "Write the all-ones-mask debug model");
  identity->add_option("--out", id_out, "Checkpoint path")->required();

  // complexity
  std::string cx_specialist = "512x2", cx_gate = "128x2", cx_baseline = "1024x2";
  int cx_clusters = 4;
  auto* cx = app.add_subcommand("complexity", "Learned vs inference-active parameter counts");
  cx->add_option("--specialist", cx_specialist, "Specialist architecture, e.g. 512x2");
  cx->add_option("--gate", cx_gate, "Gate architecture");
  cx->add_option("--baseline", cx_baseline, "Baseline architecture");
  cx->add_option("--clusters", cx_clusters, "Number of specialists");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    if (*synth) {
      RunConfig c = synth_common.load();
      if (synth_speakers) c.synth.speakers = *synth_speakers;
      if (synth_test_speakers) c.synth.test_speakers = *synth_test_speakers;
      if (synth_utts) c.synth.utterances_per_speaker = *synth_utts;
      if (synth_noises) c.synth.noises = *synth_noises;
      if (synth_test_noises) c.synth.test_noises = *synth_test_noises;
      const Corpus corpus = generate_synthetic_corpus(c.synth, synth_out);
      out << "wrote " << corpus.speech.size() << " speech and " << corpus.noise.size()
          << " noise files; manifest " << (fs::path(synth_out) / "manifest.json").string()
          << "\n";
    } else if (*ingest) {
      const Corpus corpus = ingest_directories(ingest_spec);
      save_manifest(corpus, ingest_out);
      out << "indexed " << corpus.speech.size() << " utterances and " << corpus.noise.size()
          << " noises into " << ingest_out << "\n";
    } else if (*mix) {
      const RunConfig c = mix_common.load();
      const AudioBank bank = load_bank(c);
      const auto mixtures = make_test_mixtures(bank, mix_count, c.train.snr_levels,
                                               c.train.latent, c.train.seed,
                                               parse_split(mix_split));
      json index = json::array();
      char name[32];
      for (std::size_t i = 0; i < mixtures.size(); ++i) {
        const MixtureSample& m = mixtures[i];
        std::snprintf(name, sizeof(name), "%05zu", i);
        const fs::path base = fs::path(mix_out) / name;
        // Unit-RMS signals are scaled into 16-bit range together.
        double peak = 1e-12;
        for (double v : m.x) peak = std::max(peak, std::abs(v));
        for (double v : m.s) peak = std::max(peak, std::abs(v));
        const double scale = 0.9 / peak;
        auto scaled = [&](const Signal& s) {
          Signal o(s);
          for (double& v : o) v *= scale;
          return o;
        };
        save_wav(base.string() + "_x.wav", scaled(m.x));
        save_wav(base.string() + "_s.wav", scaled(m.s));
        save_wav(base.string() + "_n.wav", scaled(m.n));
        index.push_back({{"id", name},
                         {"snr_db", m.snr_db},
                         {"cluster_label", m.cluster_label},
                         {"gender", to_string(m.gender)},
                         {"samples", m.x.size()}});
      }
      write_json(fs::path(mix_out) / "mixtures.json", index);
      out << "wrote " << mixtures.size() << " mixtures to " << mix_out << "\n";
    } else if (*train_spec) {
      const RunConfig c = spec_common.load();
      std::optional<int> cluster;
      if (spec_cluster != "baseline") {
        try {
          cluster = std::stoi(spec_cluster);
        } catch (const std::exception&) {
          throw Error("--cluster must be an index or 'baseline', got '" + spec_cluster + "'");
        }
      }
      const AudioBank bank = load_bank(c);
      const SpecialistTraining r = train_specialist(c.train, bank, cluster);
      ensure_parent(spec_out);
      save_model(spec_out, Denoiser{r.model}, c.train.stft);
      write_history(spec_out, r.history, c);
      out << r.history.task << ": " << r.history.loss.size() << " steps, best validation SI-SDRi "
          << r.history.best_validation << " dB at step " << r.history.best_step << "\n";
    } else if (*train_gate) {
      const RunConfig c = gate_common.load();
      const AudioBank bank = load_bank(c);
      const GatingTraining r = train_gating(c.train, bank);
      ensure_parent(gate_out);
      save_model(gate_out, r.model, c.train.stft);
      write_history(gate_out, r.history, c);
      out << r.history.task << ": " << r.history.loss.size() << " steps, best validation accuracy "
          << r.history.best_validation << " at step " << r.history.best_step << "\n";
    } else if (*assemble || *finetune) {
      const RunConfig c = ens_common.load();
      EnsembleModel naive = build_ensemble(ens_specialists, ens_gate, c);
      ensure_parent(ens_out);
      if (*assemble) {
        save_model(ens_out, Denoiser{naive}, c.train.stft);
        out << "wrote naive ensemble of " << naive.clusters() << " specialists to " << ens_out
            << "\n";
      } else {
        if (!ens_naive_out.empty()) save_model(ens_naive_out, Denoiser{naive}, c.train.stft);
        const AudioBank bank = load_bank(c);
        const EnsembleTraining r = finetune_ensemble(c.train, std::move(naive), bank);
        save_model(ens_out, Denoiser{r.model}, c.train.stft);
        write_history(ens_out, r.history, c);
        out << r.history.task << ": " << r.history.loss.size()
            << " steps, best validation SI-SDRi " << r.history.best_validation << " dB at step "
            << r.history.best_step << "\n";
      }
    } else if (*dn) {
      const LoadedModel loaded = load_model(dn_model);
      const Denoiser model = as_denoiser(loaded);
      const Signal x = load_wav(dn_in);
      const DenoiseResult r = denoise(model, x, loaded.stft);
      save_wav(dn_out, r.estimate);
      if (std::holds_alternative<EnsembleModel>(model))
        out << "chosen specialist: " << r.report.chosen << "\n"
            << "gate probabilities: " << join_probs(r.report.gate_probs) << "\n";
      out << "active parameters: " << r.report.active_params << " of "
          << r.report.learned_params << " learned\n";
    } else if (*ev) {
      const RunConfig c = eval_common.load();
      EvalModels models;
      for (const std::string& entry : eval_models) {
        const auto eq = entry.find('=');
        if (eq == std::string::npos || eq == 0)
          throw Error("--models entries must look like name=checkpoint, got '" + entry + "'");
        const std::string name = entry.substr(0, eq);
        LoadedModel loaded = load_model(entry.substr(eq + 1));
        if (!(loaded.stft == c.train.stft))
          throw Error("model '" + name + "' was trained with a different STFT configuration");
        std::visit(
            [&](auto& m) {
              using T = std::decay_t<decltype(m)>;
              if constexpr (std::is_same_v<T, SpecialistModel>)
                models.denoisers.emplace_back(name, std::move(m));
              else if constexpr (std::is_same_v<T, EnsembleModel>)
                models.ensembles.emplace_back(name, std::move(m));
              else if constexpr (std::is_same_v<T, GatingModel>)
                models.gates.emplace_back(name, std::move(m));
            },
            loaded.model);
      }
      const AudioBank bank = load_bank(c);
      const EvalReport report =
          evaluate(models, bank, eval_mixtures.value_or(c.eval_mixtures), c.train,
                   mix_seed(c.train.seed, 900));
      write_json(eval_report, report.to_json());
      out << report.to_table();
    } else if (*identity) {
      ensure_parent(id_out);
      save_model(id_out, Denoiser{IdentityModel{}});
      out << "wrote identity model to " << id_out << "\n";
    } else if (*cx) {
      const Topology spec_t{513, parse_architecture(cx_specialist), 513, OutputActivation::kSigmoid};
      const Topology gate_t{513, parse_architecture(cx_gate), cx_clusters,
                            OutputActivation::kScaledSoftmax};
      const Topology base_t{513, parse_architecture(cx_baseline), 513, OutputActivation::kSigmoid};
      const Complexity s = complexity(spec_t), g = complexity(gate_t), b = complexity(base_t);
      out << "specialist " << cx_specialist << ": " << s.params << " params\n"
          << "gate " << cx_gate << ": " << g.params << " params\n"
          << "ensemble learned: " << s.params * cx_clusters + g.params << " params\n"
          << "ensemble active (hard gating): " << s.params + g.params << " params\n"
          << "baseline " << cx_baseline << ": " << b.params << " params\n";
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace smle

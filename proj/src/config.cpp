// Copyright 2026 The SMLE Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "smle/config.hpp"

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

namespace smle {
namespace {

using nlohmann::json;

void reject_unknown(const json& j, const std::string& where,
                    std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw Error("config: '" + where + "' must be an object");
  const std::set<std::string> keys(allowed.begin(), allowed.end());
  for (const auto& [key, value] : j.items())
    if (!keys.count(key))
      throw Error("config: unknown key '" + key + "' in " + where);
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(std::string("config: bad value for '") + key + "': " + e.what());
  }
}

}  // namespace

json RunConfig::to_json() const {
  const TrainConfig& t = train;
  return {
      {"seed", t.seed},
      {"threads", t.threads},
      {"output_dir", output_dir.string()},
      {"corpus", {{"manifest", manifest.string()}}},
      {"stft", {{"frame_size", t.stft.frame_size}, {"hop", t.stft.hop}}},
      {"train",
       {{"hidden", t.hidden},
        {"gate_hidden", t.gate_hidden},
        {"batch_size", t.batch_size},
        {"learning_rate", t.learning_rate},
        {"lambda", t.lambda},
        {"max_steps", t.max_steps},
        {"validate_every", t.validate_every},
        {"patience", t.patience},
        {"validation_size", t.validation_size},
        {"latent", to_string(t.latent)},
        {"snr_levels", t.snr_levels},
        {"snippet_seconds", t.snippet_seconds}}},
      {"synth",
       {{"speakers", synth.speakers},
        {"test_speakers", synth.test_speakers},
        {"utterances_per_speaker", synth.utterances_per_speaker},
        {"noises", synth.noises},
        {"test_noises", synth.test_noises},
        {"min_seconds", synth.min_seconds},
        {"max_seconds", synth.max_seconds},
        {"noise_seconds", synth.noise_seconds},
        {"validation_fraction", synth.validation_fraction}}},
      {"eval", {{"n_mixtures", eval_mixtures}}}};
}

RunConfig RunConfig::from_json(const json& j, const std::filesystem::path& base_dir) {
  RunConfig c;
  reject_unknown(j, "config", {"seed", "threads", "output_dir", "corpus", "stft", "train",
                               "synth", "eval"});
  read(j, "seed", c.train.seed);
  read(j, "threads", c.train.threads);
  std::string out_dir = c.output_dir.string();
  read(j, "output_dir", out_dir);
  c.output_dir = out_dir;
  if (j.contains("corpus")) {
    const json& corpus = j["corpus"];
    reject_unknown(corpus, "corpus", {"manifest"});
    std::string manifest;
    read(corpus, "manifest", manifest);
    c.manifest = manifest;
  }
  if (j.contains("stft")) {
    reject_unknown(j["stft"], "stft", {"frame_size", "hop"});
    read(j["stft"], "frame_size", c.train.stft.frame_size);
    read(j["stft"], "hop", c.train.stft.hop);
  }
  if (j.contains("train")) {
    const json& t = j["train"];
    reject_unknown(t, "train",
                   {"hidden", "gate_hidden", "batch_size", "learning_rate", "lambda", "max_steps",
                    "validate_every", "patience", "validation_size", "latent", "snr_levels",
                    "snippet_seconds"});
    TrainConfig& tc = c.train;
    read(t, "hidden", tc.hidden);
    read(t, "gate_hidden", tc.gate_hidden);
    read(t, "batch_size", tc.batch_size);
    read(t, "learning_rate", tc.learning_rate);
    read(t, "lambda", tc.lambda);
    read(t, "max_steps", tc.max_steps);
    read(t, "validate_every", tc.validate_every);
    read(t, "patience", tc.patience);
    read(t, "validation_size", tc.validation_size);
    read(t, "snr_levels", tc.snr_levels);
    read(t, "snippet_seconds", tc.snippet_seconds);
    if (t.contains("latent")) tc.latent = parse_latent(t["latent"].get<std::string>());
  }
  if (j.contains("synth")) {
    const json& s = j["synth"];
    reject_unknown(s, "synth",
                   {"speakers", "test_speakers", "utterances_per_speaker", "noises",
                    "test_noises", "min_seconds", "max_seconds", "noise_seconds",
                    "validation_fraction"});
    read(s, "speakers", c.synth.speakers);
    read(s, "test_speakers", c.synth.test_speakers);
    read(s, "utterances_per_speaker", c.synth.utterances_per_speaker);
    read(s, "noises", c.synth.noises);
    read(s, "test_noises", c.synth.test_noises);
    read(s, "min_seconds", c.synth.min_seconds);
    read(s, "max_seconds", c.synth.max_seconds);
    read(s, "noise_seconds", c.synth.noise_seconds);
    read(s, "validation_fraction", c.synth.validation_fraction);
  }
  if (j.contains("eval")) {
    reject_unknown(j["eval"], "eval", {"n_mixtures"});
    read(j["eval"], "n_mixtures", c.eval_mixtures);
  }
  if (!c.manifest.empty() && c.manifest.is_relative() && !base_dir.empty())
    c.manifest = base_dir / c.manifest;
  if (c.output_dir.is_relative() && !base_dir.empty()) c.output_dir = base_dir / c.output_dir;
  c.synth.seed = c.train.seed;
  c.train.validate();
  if (c.eval_mixtures < 1) throw Error("config: eval.n_mixtures must be positive");
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config '" + path.string() + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error("config '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return RunConfig::from_json(j, path.parent_path());
}

void apply_seed_env(RunConfig& config) {
  const char* env = std::getenv("SMLE_SEED");
  if (!env || !*env) return;
  try {
    // stoull accepts a sign and wraps negatives around.
    if (!std::isdigit(static_cast<unsigned char>(env[0]))) throw std::invalid_argument("sign");
    std::size_t used = 0;
    const unsigned long long v = std::stoull(env, &used);
    if (used != std::string(env).size()) throw std::invalid_argument("trailing");
    config.train.seed = v;
    config.synth.seed = v;
  } catch (const std::exception&) {
    throw Error(std::string("SMLE_SEED must be a non-negative integer, got '") + env + "'");
  }
}

std::vector<int> parse_architecture(const std::string& text) {
  std::vector<int> out;
  const auto x = text.find('x');
  try {
    if (x != std::string::npos) {
      const int units = std::stoi(text.substr(0, x));
      const int layers = std::stoi(text.substr(x + 1));
      if (units < 1 || layers < 1) throw std::invalid_argument("nonpositive");
      out.assign(layers, units);
    } else {
      std::stringstream ss(text);
      std::string item;
      while (std::getline(ss, item, ',')) {
        const int v = std::stoi(item);
        if (v < 1) throw std::invalid_argument("nonpositive");
        out.push_back(v);
      }
    }
  } catch (const std::exception&) {
    throw Error("bad architecture '" + text + "' (use e.g. 16x2 or 64,32)");
  }
  if (out.empty()) throw Error("bad architecture '" + text + "'");
  return out;
}

}  // namespace smle

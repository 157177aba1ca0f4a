// Copyright 2026 The SMLE Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "smle/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

#include "smle/wav.hpp"

namespace smle {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr double kSilenceRatio = 1e-4;
constexpr int kCropAttempts = 32;

std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

std::vector<fs::path> wav_files(const fs::path& root) {
  std::vector<fs::path> out;
  if (root.empty()) return out;
  if (!fs::is_directory(root)) throw Error("not a directory: '" + root.string() + "'");
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
    if (ext == ".wav") out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::map<std::string, Gender> read_speakers_file(const fs::path& path) {
  std::map<std::string, Gender> out;
  if (path.empty()) return out;
  std::ifstream in(path);
  if (!in) throw Error("cannot open speakers file '" + path.string() + "'");
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == ';') continue;
    std::stringstream ss(line);
    std::string id, sex;
    std::getline(ss, id, '|');
    std::getline(ss, sex, '|');
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    id = trim(id);
    sex = trim(sex);
    if (sex == "M" || sex == "m")
      out[id] = Gender::kMale;
    else if (sex == "F" || sex == "f")
      out[id] = Gender::kFemale;
  }
  return out;
}

}  // namespace

std::string to_string(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kValidation: return "val";
    case Split::kTest: return "test";
  }
  return "?";
}

std::string to_string(Gender gender) {
  switch (gender) {
    case Gender::kMale: return "male";
    case Gender::kFemale: return "female";
    case Gender::kUnknown: return "unknown";
  }
  return "?";
}

std::string to_string(Latent latent) {
  return latent == Latent::kSnr ? "snr" : "gender";
}

Split parse_split(const std::string& name) {
  if (name == "train") return Split::kTrain;
  if (name == "val" || name == "validation") return Split::kValidation;
  if (name == "test") return Split::kTest;
  throw Error("unknown split '" + name + "'");
}

Gender parse_gender(const std::string& name) {
  if (name == "male" || name == "M") return Gender::kMale;
  if (name == "female" || name == "F") return Gender::kFemale;
  if (name.empty() || name == "unknown") return Gender::kUnknown;
  throw Error("unknown gender '" + name + "'");
}

Latent parse_latent(const std::string& name) {
  if (name == "snr") return Latent::kSnr;
  if (name == "gender") return Latent::kGender;
  throw Error("unknown latent space '" + name + "' (expected snr or gender)");
}

int gender_cluster(Gender gender) {
  switch (gender) {
    case Gender::kMale: return 0;
    case Gender::kFemale: return 1;
    default: throw Error("gender label required for the gender latent space");
  }
}

std::vector<std::string> cluster_labels(Latent latent, std::span<const double> snr_levels) {
  if (latent == Latent::kGender) return {"male", "female"};
  std::vector<std::string> out;
  for (double snr : snr_levels) {
    std::ostringstream s;
    s << snr << "dB";
    out.push_back(s.str());
  }
  return out;
}

fs::path Corpus::resolve(const std::string& path) const {
  const fs::path p(path);
  return p.is_absolute() ? p : root / p;
}

void Corpus::check_disjoint() const {
  std::set<std::string> seen;
  std::set<std::string> train_speakers;
  std::set<std::string> test_speakers;
  for (const SpeechItem& item : speech) {
    if (!seen.insert(item.path).second)
      throw Error("corpus lists '" + item.path + "' twice");
    (item.split == Split::kTest ? test_speakers : train_speakers).insert(item.speaker);
  }
  for (const std::string& spk : test_speakers)
    if (train_speakers.count(spk))
      throw Error("speaker '" + spk + "' appears in both training and test splits");
  for (const NoiseItem& item : noise)
    if (!seen.insert(item.path).second)
      throw Error("corpus lists '" + item.path + "' twice");
}

void save_manifest(const Corpus& corpus, const fs::path& path) {
  json speech = json::object();
  for (const SpeechItem& item : corpus.speech)
    speech[item.path] = {{"speaker", item.speaker},
                         {"gender", to_string(item.gender)},
                         {"split", to_string(item.split)}};
  json noise = json::object();
  for (const NoiseItem& item : corpus.noise) noise[item.path] = {{"split", to_string(item.split)}};
  const json doc = {{"version", 1}, {"speech", speech}, {"noise", noise}};
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write manifest '" + path.string() + "'");
  out << doc.dump(2) << "\n";
}

Corpus load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open manifest '" + path.string() + "'");
  Corpus corpus;
  corpus.root = path.parent_path();
  try {
    const json doc = json::parse(in);
    for (const auto& [key, value] : doc.at("speech").items())
      corpus.speech.push_back({key, value.at("speaker").get<std::string>(),
                               parse_gender(value.value("gender", std::string())),
                               parse_split(value.at("split").get<std::string>())});
    for (const auto& [key, value] : doc.at("noise").items())
      corpus.noise.push_back({key, parse_split(value.at("split").get<std::string>())});
  } catch (const json::exception& e) {
    throw Error("malformed manifest '" + path.string() + "': " + e.what());
  }
  corpus.check_disjoint();
  return corpus;
}

void reserve_validation(Corpus& corpus, double fraction, std::uint64_t seed) {
  if (fraction < 0.0 || fraction >= 1.0)
    throw Error("validation fraction must lie in [0, 1)");
  auto reserve = [&](auto& items, std::uint64_t stream) {
    std::vector<std::size_t> train;
    for (std::size_t i = 0; i < items.size(); ++i)
      if (items[i].split == Split::kTrain) train.push_back(i);
    std::size_t count = static_cast<std::size_t>(std::lround(fraction * train.size()));
    if (fraction > 0.0 && train.size() >= 2) count = std::max<std::size_t>(count, 1);
    std::mt19937_64 rng(mix_seed(seed, stream));
    std::shuffle(train.begin(), train.end(), rng);
    for (std::size_t i = 0; i < count; ++i) items[train[i]].split = Split::kValidation;
  };
  reserve(corpus.speech, 1);
  reserve(corpus.noise, 2);
}

Corpus ingest_directories(const IngestSpec& spec) {
  Corpus corpus;
  corpus.root = fs::path();
  const auto genders = read_speakers_file(spec.speakers_file);
  auto add_speech = [&](const fs::path& root, Split split) {
    for (const fs::path& file : wav_files(root)) {
      const fs::path rel = fs::relative(file, root);
      const std::string speaker = rel.begin()->string();
      const auto it = genders.find(speaker);
      corpus.speech.push_back({fs::absolute(file).string(), speaker,
                               it == genders.end() ? Gender::kUnknown : it->second, split});
    }
  };
  auto add_noise = [&](const fs::path& root, Split split) {
    for (const fs::path& file : wav_files(root))
      corpus.noise.push_back({fs::absolute(file).string(), split});
  };
  add_speech(spec.speech_train, Split::kTrain);
  add_speech(spec.speech_test, Split::kTest);
  add_noise(spec.noise_train, Split::kTrain);
  add_noise(spec.noise_test, Split::kTest);
  if (corpus.speech.empty()) throw Error("ingest: no speech WAV files found");
  if (corpus.noise.empty()) throw Error("ingest: no noise WAV files found");
  reserve_validation(corpus, spec.validation_fraction, spec.seed);
  corpus.check_disjoint();
  return corpus;
}

AudioBank AudioBank::load(const Corpus& corpus) {
  AudioBank bank;
  for (const SpeechItem& item : corpus.speech)
    bank.speech.push_back({load_wav(corpus.resolve(item.path)), item.speaker,
                           item.gender, item.split});
  for (const NoiseItem& item : corpus.noise)
    bank.noise.push_back({load_wav(corpus.resolve(item.path)), item.split});
  return bank;
}

double rms(std::span<const double> signal) {
  if (signal.empty()) return 0.0;
  double energy = 0.0;
  for (double v : signal) energy += v * v;
  return std::sqrt(energy / signal.size());
}

Signal normalize_rms(std::span<const double> signal) {
  const double r = rms(signal);
  if (!(r > 0.0)) throw Error("no usable snippet: signal is silent");
  Signal out(signal.begin(), signal.end());
  for (double& v : out) v /= r;
  return out;
}

Signal normalize_snippet(std::span<const double> source, double seconds,
                         std::mt19937_64& rng) {
  const auto length = static_cast<std::size_t>(std::lround(seconds * kSampleRate));
  if (length == 0) throw Error("snippet length must be positive");
  if (source.size() < length)
    throw Error("no usable snippet: source has " + std::to_string(source.size()) +
                " samples, need " + std::to_string(length));
  const double source_rms = rms(source);
  if (!(source_rms > 0.0)) throw Error("no usable snippet: source is silent");
  for (int attempt = 0; attempt < kCropAttempts; ++attempt) {
    const std::size_t start = uniform_index(rng, source.size() - length + 1);
    const auto crop = source.subspan(start, length);
    if (rms(crop) >= kSilenceRatio * source_rms) return normalize_rms(crop);
  }
  throw Error("no usable snippet: every crop was silent");
}

double noise_gain(double snr_db) { return std::pow(10.0, -snr_db / 20.0); }

MixtureSample mix_at_snr(std::span<const double> speech, std::span<const double> noise,
                         double snr_db) {
  if (speech.size() != noise.size())
    throw Error("mix_at_snr: speech has " + std::to_string(speech.size()) +
                " samples, noise has " + std::to_string(noise.size()));
  if (speech.empty()) throw Error("mix_at_snr: empty signals");
  const double g = noise_gain(snr_db);
  MixtureSample m;
  m.snr_db = snr_db;
  m.s.assign(speech.begin(), speech.end());
  m.n.resize(noise.size());
  m.x.resize(noise.size());
  double es = 0.0;
  double en = 0.0;
  for (std::size_t i = 0; i < noise.size(); ++i) {
    m.n[i] = g * noise[i];
    m.x[i] = m.s[i] + m.n[i];
    es += m.s[i] * m.s[i];
    en += m.n[i] * m.n[i];
  }
  if (!(en > 0.0)) throw Error("mix_at_snr: silent noise");
  const double realized = 10.0 * std::log10(es / en);
  if (std::abs(realized - snr_db) > 1e-4)
    throw Error("mix_at_snr: inputs are not unit-RMS (realized SNR " +
                std::to_string(realized) + " dB, requested " +
                std::to_string(snr_db) + " dB)");
  return m;
}

namespace {

int snr_index_of(double snr, std::span<const double> levels) {
  for (std::size_t i = 0; i < levels.size(); ++i)
    if (levels[i] == snr) return static_cast<int>(i);
  return -1;
}

std::vector<std::size_t> eligible_speech(const AudioBank& bank, Split split,
                                         std::optional<Gender> gender) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < bank.speech.size(); ++i) {
    const auto& u = bank.speech[i];
    if (u.split != split) continue;
    if (gender && u.gender != *gender) continue;
    out.push_back(i);
  }
  if (out.empty())
    throw Error("no " + to_string(split) + " speech" +
                (gender ? " for gender " + to_string(*gender) : std::string()) +
                " in corpus");
  return out;
}

std::vector<std::size_t> eligible_noise(const AudioBank& bank, Split split) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < bank.noise.size(); ++i)
    if (bank.noise[i].split == split) out.push_back(i);
  if (out.empty()) throw Error("no " + to_string(split) + " noise in corpus");
  return out;
}

void assign_label(MixtureSample& m, Latent latent) {
  m.cluster_label = latent == Latent::kSnr ? m.snr_index : gender_cluster(m.gender);
}

}  // namespace

Batch sample_batch(const AudioBank& bank, const BatchSpec& spec) {
  if (spec.size < 1) throw Error("batch size must be positive");
  if (spec.snr_levels.empty()) throw Error("batch spec lists no SNR levels");
  int fixed_index = -1;
  if (spec.fixed_snr) {
    fixed_index = snr_index_of(*spec.fixed_snr, spec.snr_levels);
    if (fixed_index < 0)
      throw Error("fixed SNR " + std::to_string(*spec.fixed_snr) +
                  " dB is not one of the configured levels");
  }
  const auto speech = eligible_speech(bank, spec.split, spec.gender);
  const auto noise = eligible_noise(bank, spec.split);
  std::mt19937_64 rng(spec.seed);
  Batch batch;
  batch.samples.reserve(spec.size);
  for (int i = 0; i < spec.size; ++i) {
    const auto& u = bank.speech[speech[uniform_index(rng, speech.size())]];
    const auto& n = bank.noise[noise[uniform_index(rng, noise.size())]];
    const int level = fixed_index >= 0
                          ? fixed_index
                          : static_cast<int>(uniform_index(rng, spec.snr_levels.size()));
    const Signal s = normalize_snippet(u.samples, spec.seconds, rng);
    const Signal v = normalize_snippet(n.samples, spec.seconds, rng);
    MixtureSample m = mix_at_snr(s, v, spec.snr_levels[level]);
    m.snr_index = level;
    m.gender = u.gender;
    assign_label(m, spec.latent);
    batch.samples.push_back(std::move(m));
  }
  return batch;
}

std::vector<MixtureSample> make_test_mixtures(const AudioBank& bank, int count,
                                              std::span<const double> snr_levels,
                                              Latent latent, std::uint64_t seed,
                                              Split split) {
  if (count < 1) throw Error("need at least one test mixture");
  if (snr_levels.empty()) throw Error("no SNR levels given");
  const auto speech = eligible_speech(bank, split, std::nullopt);
  const auto noise = eligible_noise(bank, split);
  std::mt19937_64 rng(seed);
  std::vector<MixtureSample> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    const auto& u = bank.speech[speech[uniform_index(rng, speech.size())]];
    const auto& n = bank.noise[noise[uniform_index(rng, noise.size())]];
    const std::size_t len = u.samples.size();
    Signal v(len);
    const std::size_t offset =
        n.samples.size() > len ? uniform_index(rng, n.samples.size() - len + 1) : 0;
    for (std::size_t j = 0; j < len; ++j)
      v[j] = n.samples[(offset + j) % n.samples.size()];
    const int level = i % static_cast<int>(snr_levels.size());
    MixtureSample m = mix_at_snr(normalize_rms(u.samples), normalize_rms(v), snr_levels[level]);
    m.snr_index = level;
    m.gender = u.gender;
    assign_label(m, latent);
    out.push_back(std::move(m));
  }
  return out;
}

}  // namespace smle

// Copyright 2026 The SMLE Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Corpus handling and stochastic mixture sampling.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "smle/common.hpp"

namespace smle {

enum class Split { kTrain, kValidation, kTest };
enum class Gender { kUnknown, kMale, kFemale };
/// Which latent dimension assigns mixtures to clusters.
enum class Latent { kSnr, kGender };

std::string to_string(Split split);
std::string to_string(Gender gender);
std::string to_string(Latent latent);
Split parse_split(const std::string& name);
Gender parse_gender(const std::string& name);
Latent parse_latent(const std::string& name);

/// Cluster index of a gender (male 0, female 1).
int gender_cluster(Gender gender);
std::vector<std::string> cluster_labels(Latent latent, std::span<const double> snr_levels);

inline const std::vector<double> kDefaultSnrLevels = {-5.0, 0.0, 5.0, 10.0};

struct SpeechItem {
  std::string path;  // relative to Corpus::root unless absolute
  std::string speaker;
  Gender gender = Gender::kUnknown;
  Split split = Split::kTrain;
};

struct NoiseItem {
  std::string path;
  Split split = Split::kTrain;
};

struct Corpus {
  std::filesystem::path root;
  std::vector<SpeechItem> speech;
  std::vector<NoiseItem> noise;

  std::filesystem::path resolve(const std::string& path) const;
  /// Throws when a speaker or noise file appears in both train-side and
  /// test splits, or an item is listed twice.
  void check_disjoint() const;
};

/// Manifest JSON: {"speech": {path: {speaker, gender, split}},
///                 "noise": {path: {split}}}; paths relative to the manifest.
void save_manifest(const Corpus& corpus, const std::filesystem::path& path);
Corpus load_manifest(const std::filesystem::path& path);

/// Moves round(fraction * n) training utterances and training noises into
/// the validation split (at least one of each when n >= 2).
void reserve_validation(Corpus& corpus, double fraction, std::uint64_t seed);

struct IngestSpec {
  std::filesystem::path speech_train;  // <root>/<speaker>/**/*.wav
  std::filesystem::path noise_train;   // <root>/**/*.wav
  std::filesystem::path speech_test;
  std::filesystem::path noise_test;
  /// LibriSpeech-style SPEAKERS.TXT ("id | sex | ..."); optional.
  std::filesystem::path speakers_file;
  double validation_fraction = 0.05;
  std::uint64_t seed = 0;
};
Corpus ingest_directories(const IngestSpec& spec);

/// Audio for every corpus item, decoded once.
struct AudioBank {
  struct Utterance {
    Signal samples;
    std::string speaker;
    Gender gender = Gender::kUnknown;
    Split split = Split::kTrain;
  };
  struct Noise {
    Signal samples;
    Split split = Split::kTrain;
  };
  std::vector<Utterance> speech;
  std::vector<Noise> noise;

  static AudioBank load(const Corpus& corpus);
};

double rms(std::span<const double> signal);
/// Scales to unit RMS; throws on a silent signal.
Signal normalize_rms(std::span<const double> signal);

/// Random crop of seconds * 16000 samples scaled to unit RMS. Crops whose
/// RMS is below 1e-4 of the whole source are redrawn.
Signal normalize_snippet(std::span<const double> source, double seconds,
                         std::mt19937_64& rng);

struct MixtureSample {
  Signal x;  // mixture, x[i] == s[i] + n[i]
  Signal s;  // clean speech
  Signal n;  // noise after gain
  double snr_db = 0.0;
  int snr_index = -1;
  Gender gender = Gender::kUnknown;
  int cluster_label = -1;
};

/// 10^(-snr / 20).
double noise_gain(double snr_db);

/// x = s + g n for unit-RMS inputs. The realized SNR is checked.
MixtureSample mix_at_snr(std::span<const double> speech,
                         std::span<const double> noise, double snr_db);

struct BatchSpec {
  int size = 100;
  std::vector<double> snr_levels = kDefaultSnrLevels;
  std::optional<double> fixed_snr;      // specialist batches on one level
  std::optional<Gender> gender;         // gender-filtered speech
  Latent latent = Latent::kSnr;         // how cluster_label is assigned
  Split split = Split::kTrain;
  double seconds = 1.0;
  std::uint64_t seed = 0;
};

struct Batch {
  std::vector<MixtureSample> samples;
};

/// Independent mixtures; speech, noise and SNR drawn uniformly. A pure
/// function of (bank, spec).
Batch sample_batch(const AudioBank& bank, const BatchSpec& spec);

/// Full-duration mixtures over `split`. SNR levels cycle so every level gets
/// count / levels mixtures; speech and noise are drawn uniformly. Noise
/// shorter than the utterance is looped.
std::vector<MixtureSample> make_test_mixtures(const AudioBank& bank, int count,
                                              std::span<const double> snr_levels,
                                              Latent latent, std::uint64_t seed,
                                              Split split = Split::kTest);

struct SynthSpec {
  int speakers = 10;  // training speakers; genders alternate
  int test_speakers = 4;
  int utterances_per_speaker = 10;
  int noises = 20;
  int test_noises = 6;
  double min_seconds = 1.5;
  double max_seconds = 3.0;
  double noise_seconds = 4.0;
  double validation_fraction = 0.05;
  std::uint64_t seed = 1;
};

/// Voiced-speech stand-ins: harmonic complexes with f0 in [100, 150] Hz
/// (male) or [180, 250] Hz (female) under formant-like envelopes, split into
/// syllables by amplitude modulation.
Signal synthesize_speech(Gender gender, double f0, double seconds,
                         std::uint64_t seed);
/// Non-stationary filtered noise without harmonic structure.
Signal synthesize_noise(double seconds, std::uint64_t seed);

/// Writes WAVs and manifest.json under out_dir and returns the corpus.
Corpus generate_synthetic_corpus(const SynthSpec& spec,
                                 const std::filesystem::path& out_dir);

}  // namespace smle

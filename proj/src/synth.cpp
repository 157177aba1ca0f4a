// Copyright 2026 The SMLE Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Desk-scale stand-in corpus: harmonic "speech" and filtered "noise".

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

#include "smle/data.hpp"
#include "smle/wav.hpp"

namespace smle {
namespace {

namespace fs = std::filesystem;
constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kPeak = 0.5;
constexpr int kBlock = 160;  // amplitude update interval, 10 ms

struct Formant {
  double freq;
  double bandwidth;
};
using Vowel = std::array<Formant, 3>;

void scale_peak(Signal& s, double peak) {
  double m = 0.0;
  for (double v : s) m = std::max(m, std::abs(v));
  if (m > 0.0)
    for (double& v : s) v *= peak / m;
}

// RBJ biquad, direct form I.
struct Biquad {
  double b0 = 1, b1 = 0, b2 = 0, a1 = 0, a2 = 0;
  double x1 = 0, x2 = 0, y1 = 0, y2 = 0;

  static Biquad make(int type, double freq, double q) {
    const double w = kTwoPi * freq / kSampleRate;
    const double alpha = std::sin(w) / (2.0 * q);
    const double c = std::cos(w);
    double b0, b1, b2;
    switch (type) {
      case 0:  // low-pass
        b0 = (1 - c) / 2; b1 = 1 - c; b2 = (1 - c) / 2; break;
      case 1:  // high-pass
        b0 = (1 + c) / 2; b1 = -(1 + c); b2 = (1 + c) / 2; break;
      default:  // band-pass, constant peak gain
        b0 = alpha; b1 = 0; b2 = -alpha; break;
    }
    const double a0 = 1 + alpha;
    Biquad f;
    f.b0 = b0 / a0; f.b1 = b1 / a0; f.b2 = b2 / a0;
    f.a1 = -2 * c / a0; f.a2 = (1 - alpha) / a0;
    return f;
  }

  double operator()(double x) {
    const double y = b0 * x + b1 * x1 + b2 * x2 - a1 * y1 - a2 * y2;
    x2 = x1; x1 = x;
    y2 = y1; y1 = y;
    return y;
  }
};

}  // namespace

Signal synthesize_speech(Gender gender, double f0, double seconds, std::uint64_t seed) {
  if (f0 <= 0.0 || seconds <= 0.0) throw Error("synthesize_speech: bad arguments");
  std::mt19937_64 rng(seed);
  auto uni = [&](double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
  };
  // Higher voices get slightly raised formants.
  const double shift = gender == Gender::kFemale ? 1.15 : 1.0;
  std::array<Vowel, 5> vowels;
  for (Vowel& v : vowels)
    v = {Formant{uni(300, 900) * shift, uni(80, 160)},
         Formant{uni(900, 2400) * shift, uni(100, 200)},
         Formant{uni(2400, 3400) * shift, uni(150, 250)}};

  const auto length = static_cast<std::size_t>(std::lround(seconds * kSampleRate));
  Signal out(length, 0.0);
  double phase = 0.0;
  std::size_t pos = static_cast<std::size_t>(uni(0.0, 0.06) * kSampleRate);
  while (pos < length) {
    const auto syl_len = static_cast<std::size_t>(uni(0.12, 0.30) * kSampleRate);
    const Vowel& vowel = vowels[std::uniform_int_distribution<int>(0, 4)(rng)];
    const double f_start = f0 * (1.0 + uni(-0.04, 0.04));
    const double f_end = f0 * (1.0 + uni(-0.04, 0.04));
    const double level = uni(0.5, 1.0);
    const std::size_t end = std::min(length, pos + syl_len);
    std::vector<double> amps;
    for (std::size_t i = pos; i < end; i += kBlock) {
      const std::size_t block_end = std::min(end, i + kBlock);
      const double frac = static_cast<double>(i - pos) / syl_len;
      const double f = f_start + (f_end - f_start) * frac;
      const int harmonics = static_cast<int>(7000.0 / f);
      amps.assign(harmonics + 1, 0.0);
      for (int h = 1; h <= harmonics; ++h) {
        const double fh = h * f;
        double a = 0.04 / h;
        for (const Formant& fm : vowel) {
          const double d = (fh - fm.freq) / fm.bandwidth;
          a += std::exp(-0.5 * d * d);
        }
        amps[h] = a;
      }
      for (std::size_t n = i; n < block_end; ++n) {
        const double env_phase = static_cast<double>(n - pos) / syl_len;
        const double env = level * std::pow(std::sin(std::numbers::pi * env_phase), 2.0);
        phase += kTwoPi * f / kSampleRate;
        if (phase > kTwoPi) phase -= kTwoPi;
        // sin(h phase) by the Chebyshev recurrence.
        const double c2 = 2.0 * std::cos(phase);
        double s_prev = 0.0;
        double s_cur = std::sin(phase);
        double acc = 0.0;
        for (int h = 1; h <= harmonics; ++h) {
          acc += amps[h] * s_cur;
          const double s_next = c2 * s_cur - s_prev;
          s_prev = s_cur;
          s_cur = s_next;
        }
        out[n] = env * acc;
      }
    }
    pos = end + static_cast<std::size_t>(uni(0.03, 0.12) * kSampleRate);
  }
  scale_peak(out, kPeak);
  return out;
}

Signal synthesize_noise(double seconds, std::uint64_t seed) {
  if (seconds <= 0.0) throw Error("synthesize_noise: bad duration");
  std::mt19937_64 rng(seed);
  auto uni = [&](double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
  };
  std::normal_distribution<double> gauss(0.0, 1.0);
  const int type = std::uniform_int_distribution<int>(0, 3)(rng);
  std::vector<Biquad> chain;
  switch (type) {
    case 0:
      chain.push_back(Biquad::make(0, uni(300, 4000), 0.707));
      break;
    case 1:
      chain.push_back(Biquad::make(1, uni(500, 3000), 0.707));
      break;
    case 2:
      chain.push_back(Biquad::make(2, uni(300, 5000), uni(0.5, 1.5)));
      break;
    default:
      // broadband with a gentle tilt
      chain.push_back(Biquad::make(0, uni(4000, 7500), 0.6));
      break;
  }
  const double rate = uni(0.2, 3.0);
  const double depth = uni(0.0, 0.8);
  const double offset = uni(0.0, kTwoPi);
  const auto length = static_cast<std::size_t>(std::lround(seconds * kSampleRate));
  Signal out(length);
  for (std::size_t n = 0; n < length; ++n) {
    double v = gauss(rng);
    for (Biquad& f : chain) v = f(v);
    const double am = 1.0 + depth * std::sin(kTwoPi * rate * n / kSampleRate + offset);
    out[n] = am * v;
  }
  scale_peak(out, kPeak);
  return out;
}

Corpus generate_synthetic_corpus(const SynthSpec& spec, const fs::path& out_dir) {
  if (spec.speakers < 1 || spec.utterances_per_speaker < 1 || spec.noises < 1)
    throw Error("synthetic corpus needs speakers, utterances and noises");
  if (spec.min_seconds <= 0.0 || spec.max_seconds < spec.min_seconds)
    throw Error("synthetic corpus: bad duration range");
  Corpus corpus;
  corpus.root = out_dir;
  fs::create_directories(out_dir);
  std::mt19937_64 rng(mix_seed(spec.seed, 100));
  auto uni = [&](double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
  };
  char name[64];
  const int total_speakers = spec.speakers + spec.test_speakers;
  for (int spk = 0; spk < total_speakers; ++spk) {
    const bool test = spk >= spec.speakers;
    const Gender gender = spk % 2 == 0 ? Gender::kMale : Gender::kFemale;
    const double base_f0 = gender == Gender::kMale ? uni(104, 146) : uni(185, 245);
    std::snprintf(name, sizeof(name), "spk%03d", spk);
    const std::string speaker = name;
    for (int u = 0; u < spec.utterances_per_speaker; ++u) {
      const double seconds = uni(spec.min_seconds, spec.max_seconds);
      const double f0 = base_f0 * (1.0 + uni(-0.02, 0.02));
      const std::uint64_t item_seed =
          mix_seed(spec.seed, 1000 + static_cast<std::uint64_t>(spk) * 1000 + u);
      std::snprintf(name, sizeof(name), "speech/%s/utt%03d.wav", speaker.c_str(), u);
      save_wav(out_dir / name, synthesize_speech(gender, f0, seconds, item_seed));
      corpus.speech.push_back({name, speaker, gender, test ? Split::kTest : Split::kTrain});
    }
  }
  for (int i = 0; i < spec.noises + spec.test_noises; ++i) {
    std::snprintf(name, sizeof(name), "noise/noise%03d.wav", i);
    save_wav(out_dir / name,
             synthesize_noise(spec.noise_seconds, mix_seed(spec.seed, 5000000 + i)));
    corpus.noise.push_back({name, i >= spec.noises ? Split::kTest : Split::kTrain});
  }
  reserve_validation(corpus, spec.validation_fraction, spec.seed);
  corpus.check_disjoint();
  save_manifest(corpus, out_dir / "manifest.json");
  return corpus;
}

}  // namespace smle

#include "dsx/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "dsx/audio.hpp"
#include "dsx/rng.hpp"

namespace fs = std::filesystem;

namespace dsx {

std::vector<CorpusClip> scan_corpus(const std::string& dir, double min_seconds) {
  if (!fs::is_directory(dir)) fail(ErrorKind::Resource, "corpus dir missing: " + dir);
  std::vector<CorpusClip> clips;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const auto p = entry.path();
    if (p.extension() != ".wav") continue;
    clips.push_back({p.stem().string(), p.string()});
  }
  std::sort(clips.begin(), clips.end(),
            [](const CorpusClip& a, const CorpusClip& b) { return a.id < b.id; });

  std::vector<CorpusClip> kept;
  for (auto& c : clips) {
    const AudioBuffer b = wav_read(c.path);
    if (b.channels() == 1 &&
        static_cast<double>(b.length()) >= min_seconds * kSampleRate)
      kept.push_back(std::move(c));
  }
  if (kept.empty()) fail(ErrorKind::Resource, "no usable clips in " + dir);
  return kept;
}

std::vector<double> synth_speech_clip(uint64_t seed, double seconds) {
  Rng rng(seed);
  const size_t n = static_cast<size_t>(seconds * kSampleRate);
  std::vector<double> x(n, 0.0);

  const double f0_base = rng.uniform(100.0, 260.0);
  const double f0_drift = rng.uniform(0.2, 0.8);
  // Two formant-like emphasis bands per talker.
  const double fmt1 = rng.uniform(400.0, 900.0);
  const double fmt2 = rng.uniform(1400.0, 3200.0);
  const double syllable_hz = rng.uniform(2.5, 5.0);
  const double syl_phase = rng.uniform(0.0, 2.0 * M_PI);

  double noise_lp = 0.0;
  std::vector<double> phases(24);
  for (auto& p : phases) p = rng.uniform(0.0, 2.0 * M_PI);

  // Word-level gating: bursts of a few syllables separated by short pauses.
  std::vector<double> gate(n, 0.0);
  {
    size_t pos = 0;
    while (pos < n) {
      const size_t word = static_cast<size_t>(
          rng.uniform(0.25, 0.9) * kSampleRate);
      const size_t pause = static_cast<size_t>(
          rng.uniform(0.08, 0.30) * kSampleRate);
      const size_t ramp = kSampleRate / 100;  // 10 ms fades
      for (size_t i = 0; i < word && pos + i < n; ++i) {
        double g = 1.0;
        if (i < ramp) g = static_cast<double>(i) / ramp;
        if (word - i < ramp) g = std::min(g, static_cast<double>(word - i) / ramp);
        gate[pos + i] = g;
      }
      pos += word + pause;
    }
  }

  for (size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / kSampleRate;
    const double f0 = f0_base * (1.0 + 0.12 * std::sin(2.0 * M_PI * f0_drift * t));
    // Voiced part: harmonic stack weighted by formant proximity.
    double v = 0.0;
    for (int h = 1; h <= 24; ++h) {
      const double fh = f0 * h;
      if (fh > 8000.0) break;
      const double w1 = std::exp(-std::pow((fh - fmt1) / 500.0, 2.0));
      const double w2 = 0.7 * std::exp(-std::pow((fh - fmt2) / 900.0, 2.0));
      const double amp = (w1 + w2 + 0.05) / h;
      phases[h - 1] += 2.0 * M_PI * fh / kSampleRate;
      v += amp * std::sin(phases[h - 1]);
    }
    // Unvoiced part: lowpassed noise, stronger between syllable peaks.
    const double e = rng.uniform(-1.0, 1.0);
    noise_lp = 0.82 * noise_lp + 0.18 * e;
    const double syl = 0.5 * (1.0 + std::sin(2.0 * M_PI * syllable_hz * t + syl_phase));
    const double env = std::pow(syl, 1.5) * gate[i];
    const double voiced_mix = 0.75 + 0.25 * std::sin(2.0 * M_PI * 0.9 * t);
    x[i] = env * (voiced_mix * v + (1.0 - voiced_mix) * 2.2 * noise_lp);
  }
  peak_normalize(x, 0.9);
  return x;
}

void synth_corpus_dir(const std::string& dir, int n, double seconds,
                      uint64_t seed) {
  fs::create_directories(dir);
  for (int i = 0; i < n; ++i) {
    AudioBuffer b(1, 0);
    b.data[0] = synth_speech_clip(hash_seed(seed, static_cast<uint64_t>(i)), seconds);
    char name[32];
    std::snprintf(name, sizeof(name), "clip_%03d.wav", i);
    wav_write(b, (fs::path(dir) / name).string(), WavEncoding::Float32);
  }
}

}  // namespace dsx

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "dsx/audio.hpp"
#include "dsx/dsp.hpp"
#include "dsx/features.hpp"
#include "dsx/rng.hpp"

using namespace dsx;
namespace fs = std::filesystem;

namespace {

AudioBuffer random_pair(size_t n, uint64_t seed) {
  AudioBuffer b(2, n);
  Rng rng(seed);
  for (int c = 0; c < 2; ++c)
    for (auto& v : b[c]) v = rng.uniform(-0.5, 0.5);
  return b;
}

}  // namespace

TEST_CASE("identical channels: IPD and ILD are zero") {
  AudioBuffer b = random_pair(3000, 1);
  b.data[1] = b.data[0];
  const Spectrogram s = stft(b, FrameSpec::hann());
  std::vector<double> ipd, ild;
  interchannel_features(s, ipd, ild);
  for (double v : ipd) CHECK(std::abs(v) < 1e-9);
  for (double v : ild) CHECK(std::abs(v) < 1e-9);
}

TEST_CASE("doubled magnitude gives ILD of 20 log10 2") {
  AudioBuffer b = random_pair(3000, 2);
  for (size_t i = 0; i < b.length(); ++i) b[1][i] = 2.0 * b[0][i];
  const Spectrogram s = stft(b, FrameSpec::hann());
  std::vector<double> ipd, ild;
  interchannel_features(s, ipd, ild);
  for (double v : ild) CHECK(v == doctest::Approx(6.02059991).epsilon(1e-6));
  for (double v : ipd) CHECK(std::abs(v) < 1e-9);
}

TEST_CASE("delayed pure tone: IPD follows the linear phase law") {
  // Oracle: analytic phase of a delayed tone, verified via the DFT.
  const FrameSpec fs = FrameSpec::hann();
  const int k = 24;  // 2000 Hz: exactly periodic in the 288 window
  const double f_hz = static_cast<double>(k) * kSampleRate / fs.window_len;
  const double delay = 3.0;
  AudioBuffer b(2, 4800);
  for (size_t i = 0; i < b.length(); ++i) {
    b[0][i] = std::cos(2.0 * M_PI * f_hz * i / kSampleRate);
    b[1][i] = std::cos(2.0 * M_PI * f_hz * (static_cast<double>(i) - delay) /
                       kSampleRate);
  }
  const Spectrogram s = stft(b, fs);
  std::vector<double> ipd, ild;
  interchannel_features(s, ipd, ild);
  const double expected = -2.0 * M_PI * f_hz * delay / kSampleRate;  // wrapped
  double wrapped = std::fmod(expected + M_PI, 2.0 * M_PI);
  if (wrapped < 0) wrapped += 2.0 * M_PI;
  wrapped -= M_PI;
  // Check interior frames at the tone bin.
  for (int t = 3; t < s.frames - 3; ++t)
    CHECK(ipd[static_cast<size_t>(t) * s.bins + k] ==
          doctest::Approx(wrapped).epsilon(1e-4));
}

TEST_CASE("IPD antisymmetry and ILD negation under channel swap") {
  AudioBuffer b = random_pair(4000, 3);
  AudioBuffer swapped(2, 4000);
  swapped.data[0] = b.data[1];
  swapped.data[1] = b.data[0];
  const Spectrogram s1 = stft(b, FrameSpec::hann());
  const Spectrogram s2 = stft(swapped, FrameSpec::hann());
  std::vector<double> ipd1, ild1, ipd2, ild2;
  interchannel_features(s1, ipd1, ild1);
  interchannel_features(s2, ipd2, ild2);
  for (size_t i = 0; i < ipd1.size(); ++i) {
    CHECK(ild2[i] == doctest::Approx(-ild1[i]).epsilon(1e-9));
    double diff = ipd1[i] + ipd2[i];
    diff = std::abs(std::remainder(diff, 2.0 * M_PI));
    CHECK(diff < 1e-9);
  }
}

TEST_CASE("ILD invariant to common scale; IPD invariant to common rotation") {
  AudioBuffer b = random_pair(3000, 4);
  const Spectrogram s1 = stft(b, FrameSpec::hann());
  Spectrogram s2 = s1;
  const std::complex<double> rot = std::polar(1.0, 0.7);
  for (int c = 0; c < 2; ++c)
    for (auto& v : s2.data[c]) v = v * 3.0 * rot;
  std::vector<double> ipd1, ild1, ipd2, ild2;
  interchannel_features(s1, ipd1, ild1);
  interchannel_features(s2, ipd2, ild2);
  for (size_t i = 0; i < ipd1.size(); ++i) {
    CHECK(ild2[i] == doctest::Approx(ild1[i]).epsilon(1e-9));
    CHECK(ipd2[i] == doctest::Approx(ipd1[i]).epsilon(1e-9));
  }
}

TEST_CASE("encode_features: layout, trig identity, neutral stats") {
  AudioBuffer b = random_pair(3000, 5);
  const Spectrogram s = stft(b, FrameSpec::hann());
  const NormStats stats = NormStats::neutral(s.bins);
  const FeatureStack stack = encode_features(s, stats);
  REQUIRE(stack.channels == 7);
  CHECK(stack.bins == s.bins);
  CHECK(stack.frames == s.frames);

  std::vector<double> ipd, ild;
  interchannel_features(s, ipd, ild);
  for (int t = 0; t < stack.frames; ++t) {
    for (int f = 0; f < stack.bins; ++f) {
      const size_t i = static_cast<size_t>(t) * stack.bins + f;
      CHECK(stack.data[kFeatReX1][i] == s.data[0][i].real());
      CHECK(stack.data[kFeatImX1][i] == s.data[0][i].imag());
      CHECK(stack.data[kFeatReX2][i] == s.data[1][i].real());
      CHECK(stack.data[kFeatImX2][i] == s.data[1][i].imag());
      // Neutral stats: spatial channels are the raw trig values.
      const double c = stack.data[kFeatCosIpd][i];
      const double sn = stack.data[kFeatSinIpd][i];
      CHECK(c * c + sn * sn == doctest::Approx(1.0).epsilon(1e-6));
      CHECK(std::abs(std::remainder(std::atan2(sn, c) - ipd[i], 2.0 * M_PI)) <
            1e-9);
      CHECK(stack.data[kFeatIld][i] == doctest::Approx(ild[i]).epsilon(1e-9));
    }
  }
}

TEST_CASE("silence produces exactly zero features") {
  AudioBuffer b(2, 2000);
  const Spectrogram s = stft(b, FrameSpec::hann());
  const FeatureStack stack = encode_features(s, NormStats::neutral(s.bins));
  for (int ch = 0; ch < 7; ++ch)
    for (double v : stack.data[ch]) CHECK(v == 0.0);
}

TEST_CASE("constant-field centering: stats mean removes a constant ILD") {
  AudioBuffer b = random_pair(3000, 6);
  for (size_t i = 0; i < b.length(); ++i) b[1][i] = 2.0 * b[0][i];
  const Spectrogram s = stft(b, FrameSpec::hann());
  NormStats stats = NormStats::neutral(s.bins);
  for (int f = 0; f < s.bins; ++f) stats.mean[2][f] = 6.0205999132796239;
  const FeatureStack stack = encode_features(s, stats);
  for (double v : stack.data[kFeatIld]) CHECK(std::abs(v) < 1e-5);
}

TEST_CASE("fit_norm_stats matches a two-pass oracle on one record") {
  const auto tmp = fs::temp_directory_path() / "dsx_feat";
  fs::create_directories(tmp);
  AudioBuffer b = random_pair(6000, 7);
  const auto path = (tmp / "mix.wav").string();
  wav_write(b, path);

  const FrameSpec frame = FrameSpec::hann();
  const NormStats streaming = fit_norm_stats({path}, frame, 10);

  // Two-pass oracle over raw spatial features.
  const Spectrogram s = stft(wav_read(path), frame);
  const FeatureStack raw = encode_features(s, NormStats::neutral(s.bins));
  for (int k = 0; k < 3; ++k) {
    for (int f = 0; f < s.bins; ++f) {
      double mean = 0.0;
      for (int t = 0; t < s.frames; ++t) mean += raw.data[kFeatCosIpd + k][t * s.bins + f];
      mean /= s.frames;
      double var = 0.0;
      for (int t = 0; t < s.frames; ++t) {
        const double d = raw.data[kFeatCosIpd + k][t * s.bins + f] - mean;
        var += d * d;
      }
      var /= s.frames;
      CHECK(streaming.mean[k][f] == doctest::Approx(mean).epsilon(1e-9));
      CHECK(streaming.var[k][f] == doctest::Approx(var).epsilon(1e-9));
    }
  }

  SUBCASE("normalization idempotence on the fitted record") {
    const FeatureStack norm = encode_features(s, streaming);
    for (int k = 0; k < 3; ++k) {
      for (int f = 0; f < s.bins; ++f) {
        double mean = 0.0, var = 0.0;
        for (int t = 0; t < s.frames; ++t)
          mean += norm.data[kFeatCosIpd + k][t * s.bins + f];
        mean /= s.frames;
        for (int t = 0; t < s.frames; ++t) {
          const double d = norm.data[kFeatCosIpd + k][t * s.bins + f] - mean;
          var += d * d;
        }
        var /= s.frames;
        CHECK(std::abs(mean) < 1e-6);
        // Variance within 1e-3 of 1 wherever the raw feature varies; bins
        // with (near-)constant features collapse toward zero by epsilon.
        if (streaming.var[k][f] > 1e-3) CHECK(var == doctest::Approx(1.0).epsilon(1e-3));
      }
    }
  }

  SUBCASE("degenerate dataset: identical records give zero variance") {
    const NormStats two = fit_norm_stats({path, path}, frame, 10);
    for (int k = 0; k < 3; ++k)
      for (int f = 0; f < s.bins; ++f)
        CHECK(two.var[k][f] == doctest::Approx(streaming.var[k][f]).epsilon(1e-9));
  }

  SUBCASE("max_records clamps to the dataset size") {
    const NormStats clamped = fit_norm_stats({path}, frame, 1000);
    CHECK(clamped.bins == frame.bins());
  }
}

TEST_CASE("empty manifest raises a resource error") {
  CHECK_THROWS_AS(fit_norm_stats({}, FrameSpec::hann(), 10), Error);
}

TEST_CASE("signal_ratio identities") {
  Rng rng(8);
  std::vector<double> x(4800);
  for (auto& v : x) v = rng.uniform(-0.5, 0.5);
  const FrameSpec frame = FrameSpec::hann();

  auto r1 = signal_ratio(x, x, frame);
  for (const auto& v : r1) {
    CHECK(v.real() == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(std::abs(v.imag()) < 1e-9);
  }

  std::vector<double> x2(x.size());
  for (size_t i = 0; i < x.size(); ++i) x2[i] = 2.0 * x[i];
  auto r2 = signal_ratio(x2, x, frame);
  for (const auto& v : r2) CHECK(v.real() == doctest::Approx(2.0).epsilon(1e-9));

  SUBCASE("delayed copy: unit magnitude, linear phase") {
    const int k = 24;
    const double f_hz = static_cast<double>(k) * kSampleRate / frame.window_len;
    std::vector<double> tone(4800), delayed(4800);
    for (size_t i = 0; i < tone.size(); ++i) {
      tone[i] = std::cos(2.0 * M_PI * f_hz * i / kSampleRate);
      delayed[i] =
          std::cos(2.0 * M_PI * f_hz * (static_cast<double>(i) - 2.0) / kSampleRate);
    }
    const auto r = signal_ratio(delayed, tone, frame);
    CHECK(std::abs(r[k]) == doctest::Approx(1.0).epsilon(1e-3));
    const double expected = -2.0 * M_PI * f_hz * 2.0 / kSampleRate;
    CHECK(std::arg(r[k]) ==
          doctest::Approx(std::remainder(expected, 2.0 * M_PI)).epsilon(1e-3));
  }

  SUBCASE("length mismatch raises") {
    CHECK_THROWS_AS(signal_ratio(x, std::vector<double>(100, 0.1), frame), Error);
  }
}

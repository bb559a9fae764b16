#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>

#include "dsx/beamform.hpp"
#include "dsx/rng.hpp"

using namespace dsx;

namespace {

// Synthetic far-field spectrogram: one plane-wave source per entry, plus
// optional per-bin noise. Frames x bins filled from steering phases.
Spectrogram plane_wave_spec(const ArrayGeometry& g, double theta_deg,
                            const std::vector<std::complex<double>>& amplitudes,
                            int bins, int frames) {
  Spectrogram s;
  s.bins = bins;
  s.frames = frames;
  s.data.assign(g.count(), std::vector<std::complex<double>>(
                               static_cast<size_t>(bins) * frames));
  const int window_len = (bins - 1) * 2;
  for (int f = 0; f < bins; ++f) {
    const double freq = static_cast<double>(f) * kSampleRate / window_len;
    const auto a = steering_vector(g, theta_deg, freq);
    for (int t = 0; t < frames; ++t)
      for (int ch = 0; ch < g.count(); ++ch)
        s.at(ch, f, t) = a[ch] * amplitudes[t];
  }
  return s;
}

void add_plane_wave(Spectrogram& s, const ArrayGeometry& g, double theta_deg,
                    const std::vector<std::complex<double>>& amplitudes) {
  const int window_len = (s.bins - 1) * 2;
  for (int f = 0; f < s.bins; ++f) {
    const double freq = static_cast<double>(f) * kSampleRate / window_len;
    const auto a = steering_vector(g, theta_deg, freq);
    for (int t = 0; t < s.frames; ++t)
      for (int ch = 0; ch < g.count(); ++ch)
        s.at(ch, f, t) += a[ch] * amplitudes[t];
  }
}

double band_energy(const Spectrogram& s, int ch) {
  double acc = 0.0;
  for (const auto& v : s.data[ch]) acc += std::norm(v);
  return acc;
}

std::vector<std::complex<double>> random_amps(int n, uint64_t seed) {
  Rng rng(seed);
  std::vector<std::complex<double>> a(n);
  for (auto& v : a) v = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
  return a;
}

}  // namespace

TEST_CASE("steering vector basics") {
  SUBCASE("f = 0 gives all ones") {
    const auto g = ArrayGeometry::circular(4);
    for (const auto& v : steering_vector(g, 73.0, 0.0)) {
      CHECK(v.real() == doctest::Approx(1.0));
      CHECK(std::abs(v.imag()) < 1e-12);
    }
  }
  SUBCASE("two mics broadside: equal phases") {
    ArrayGeometry g;
    g.mic_positions = {{-0.05, 0, 0}, {0.05, 0, 0}};
    const auto a = steering_vector(g, 90.0, 3000.0);
    CHECK(std::abs(a[0] - a[1]) < 1e-12);
  }
  SUBCASE("endfire at the half-wavelength frequency: pi phase difference") {
    ArrayGeometry g;
    g.mic_positions = {{-0.05, 0, 0}, {0.05, 0, 0}};
    const double f = 1715.0;  // c / (2 * 0.1)
    const auto a = steering_vector(g, 0.0, f);
    const double dphi = std::arg(a[1] * std::conj(a[0]));
    CHECK(std::abs(std::abs(dphi) - M_PI) < 1e-9);
  }
  SUBCASE("unit modulus everywhere") {
    const auto g = ArrayGeometry::circular(5);
    for (double f : {100.0, 2000.0, 9000.0})
      for (const auto& v : steering_vector(g, 33.0, f))
        CHECK(std::abs(v) == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("delay-and-sum recovers a matched plane wave exactly") {
  const auto g = ArrayGeometry::circular(4);
  const auto amps = random_amps(6, 1);
  const auto spec = plane_wave_spec(g, 40.0, amps, 33, 6);
  const auto y = delay_and_sum(spec, 40.0, g);
  // a^H a / M = 1: output equals the source amplitude at every bin.
  for (int f = 0; f < y.bins; ++f)
    for (int t = 0; t < y.frames; ++t)
      CHECK(std::abs(y.at(0, f, t) - amps[t]) < 1e-9);
}

TEST_CASE("delay-and-sum array gain against uncorrelated noise ~ 10 log10 M") {
  const int M = 4;
  const auto g = ArrayGeometry::circular(M);
  const int bins = 65, frames = 40;
  const auto amps = random_amps(frames, 2);
  auto spec = plane_wave_spec(g, 70.0, amps, bins, frames);
  // Add independent noise per channel (equal power to the source).
  Spectrogram noise_only;
  noise_only.bins = bins;
  noise_only.frames = frames;
  noise_only.data.assign(M, {});
  Rng rng(3);
  for (int ch = 0; ch < M; ++ch) {
    noise_only.data[ch].resize(static_cast<size_t>(bins) * frames);
    for (auto& v : noise_only.data[ch]) v = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
  }
  Spectrogram noisy = spec;
  for (int ch = 0; ch < M; ++ch)
    for (size_t i = 0; i < noisy.data[ch].size(); ++i)
      noisy.data[ch][i] += noise_only.data[ch][i];

  const auto y_noise = delay_and_sum(noise_only, 70.0, g);
  // Noise power drops by ~M; signal passes at unit gain.
  const double in_noise = band_energy(noise_only, 0);
  const double out_noise = band_energy(y_noise, 0);
  const double gain_db = 10.0 * std::log10(in_noise / out_noise);
  CHECK(gain_db > 10.0 * std::log10(M) - 1.5);
  CHECK(gain_db < 10.0 * std::log10(M) + 1.5);

  const auto y = delay_and_sum(noisy, 70.0, g);
  CHECK(band_energy(y, 0) > 0.0);
}

TEST_CASE("two-mic pair: deep null on the mirror side at the null frequency") {
  // Numeric beampattern oracle: steering at theta, source from theta + 180.
  // For a front/back pair the response is 2 cos(2 pi f d / c), so the first
  // null sits where the spacing is a quarter wavelength.
  ArrayGeometry g;
  g.mic_positions = {{-0.05, 0, 0}, {0.05, 0, 0}};
  auto response_db = [&](double f) {
    const auto a_look = steering_vector(g, 0.0, f);
    const auto a_src = steering_vector(g, 180.0, f);
    std::complex<double> resp(0, 0);
    for (int m = 0; m < 2; ++m) resp += std::conj(a_look[m]) * a_src[m];
    return 20.0 * std::log10(std::max(std::abs(resp) / 2.0, 1e-30));
  };
  // Scan the band for the deepest response; it must sit at c/(4d) and be a
  // genuine null.
  double best_f = 0.0, best_db = 1e9;
  for (double f = 100.0; f <= 1600.0; f += 2.5) {
    const double r = response_db(f);
    if (r < best_db) {
      best_db = r;
      best_f = f;
    }
  }
  CHECK(best_db < -20.0);
  CHECK(std::abs(best_f - kSpeedOfSound / (4.0 * 0.1)) < 5.0);
  CHECK(response_db(kSpeedOfSound / (4.0 * 0.1)) < -100.0);
}

TEST_CASE("beampattern reciprocity for the symmetric circular array") {
  const auto g = ArrayGeometry::circular(4);
  auto pattern = [&](double look, double src, double f) {
    const auto al = steering_vector(g, look, f);
    const auto as = steering_vector(g, src, f);
    std::complex<double> acc(0, 0);
    for (int m = 0; m < g.count(); ++m) acc += std::conj(al[m]) * as[m];
    return std::abs(acc) / g.count();
  };
  for (double f : {500.0, 2000.0, 6000.0})
    for (double look : {10.0, 45.0, 120.0})
      for (double src : {0.0, 77.0, 160.0})
        CHECK(pattern(look, src, f) ==
              doctest::Approx(pattern(src, look, f)).epsilon(1e-9));
}

TEST_CASE("MVDR with identity covariance reduces to delay-and-sum") {
  const auto g = ArrayGeometry::circular(4);
  const int bins = 33, frames = 24;
  // White noise frames: covariance ~ identity (plus loading).
  Spectrogram spec;
  spec.bins = bins;
  spec.frames = frames;
  spec.data.assign(4, {});
  Rng rng(4);
  for (int ch = 0; ch < 4; ++ch) {
    spec.data[ch].resize(static_cast<size_t>(bins) * frames);
    for (auto& v : spec.data[ch]) v = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
  }
  MvdrConfig cfg;
  cfg.noise_frames_begin = 0;
  cfg.noise_frames_end = frames;
  // Huge loading swamps the estimate: R -> scaled identity.
  cfg.diagonal_loading = 1e9;
  const auto y_mvdr = mvdr(spec, 55.0, g, cfg);
  const auto y_das = delay_and_sum(spec, 55.0, g);
  for (size_t i = 0; i < y_mvdr.data[0].size(); ++i)
    CHECK(std::abs(y_mvdr.data[0][i] - y_das.data[0][i]) < 1e-6);
}

TEST_CASE("MVDR satisfies the distortionless constraint") {
  const auto g = ArrayGeometry::circular(4);
  const int bins = 41, frames = 30;
  Spectrogram spec;
  spec.bins = bins;
  spec.frames = frames;
  spec.data.assign(4, {});
  Rng rng(5);
  for (int ch = 0; ch < 4; ++ch) {
    spec.data[ch].resize(static_cast<size_t>(bins) * frames);
    for (auto& v : spec.data[ch]) v = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
  }
  MvdrConfig cfg;
  cfg.noise_frames_begin = 0;
  cfg.noise_frames_end = frames;
  const auto w = mvdr_weights(spec, 25.0, g, cfg);
  const int window_len = (bins - 1) * 2;
  for (int f = 1; f < bins; ++f) {
    const auto a = steering_vector(g, 25.0,
                                   static_cast<double>(f) * kSampleRate / window_len);
    std::complex<double> dot(0, 0);
    for (int m = 0; m < 4; ++m) dot += std::conj(w[f][m]) * a[m];
    CHECK(std::abs(dot - std::complex<double>(1, 0)) < 1e-9);
  }
}

TEST_CASE("MVDR suppresses an interferer >= 15 dB at unit target gain") {
  const int M = 4;
  const auto g = ArrayGeometry::circular(M);
  const int bins = 65;
  const int noise_frames = 48, sig_frames = 32;
  const double theta_t = 30.0, theta_i = 120.0;

  const auto amps_i_noise = random_amps(noise_frames, 6);
  const auto amps_i_sig = random_amps(sig_frames, 7);
  const auto amps_t = random_amps(sig_frames, 8);

  // Head: interferer only. Tail: target + interferer.
  Spectrogram spec;
  spec.bins = bins;
  spec.frames = noise_frames + sig_frames;
  spec.data.assign(M, std::vector<std::complex<double>>(
                          static_cast<size_t>(bins) * spec.frames));
  {
    auto head = plane_wave_spec(g, theta_i, amps_i_noise, bins, noise_frames);
    for (int ch = 0; ch < M; ++ch)
      std::copy(head.data[ch].begin(), head.data[ch].end(), spec.data[ch].begin());
    Spectrogram tail = plane_wave_spec(g, theta_t, amps_t, bins, sig_frames);
    add_plane_wave(tail, g, theta_i, amps_i_sig);
    for (int ch = 0; ch < M; ++ch)
      std::copy(tail.data[ch].begin(), tail.data[ch].end(),
                spec.data[ch].begin() + static_cast<size_t>(bins) * noise_frames);
  }

  MvdrConfig cfg;
  cfg.noise_frames_begin = 0;
  cfg.noise_frames_end = noise_frames;
  const auto w = mvdr_weights(spec, theta_t, g, cfg);

  // Closed-form response oracle on the same covariance: target gain w^H a_t,
  // interferer gain w^H a_i per frequency.
  const int window_len = (bins - 1) * 2;
  double worst_suppression = 1e9;
  for (int f = 4; f < bins; ++f) {
    const double freq = static_cast<double>(f) * kSampleRate / window_len;
    const auto at = steering_vector(g, theta_t, freq);
    const auto ai = steering_vector(g, theta_i, freq);
    std::complex<double> gt(0, 0), gi(0, 0);
    for (int m = 0; m < M; ++m) {
      gt += std::conj(w[f][m]) * at[m];
      gi += std::conj(w[f][m]) * ai[m];
    }
    CHECK(std::abs(std::abs(gt) - 1.0) < 0.06);  // within +-0.5 dB
    worst_suppression =
        std::min(worst_suppression, -20.0 * std::log10(std::abs(gi) + 1e-12));
  }
  CHECK(worst_suppression >= 15.0);
}

TEST_CASE("MVDR beats delay-and-sum in output SINR on random anechoic scenes") {
  const int M = 4;
  const auto g = ArrayGeometry::circular(M);
  const int bins = 33;
  int wins = 0;
  for (uint64_t trial = 0; trial < 10; ++trial) {
    Rng rng(100 + trial);
    const double theta_t = rng.uniform(0.0, 180.0);
    double theta_i = rng.uniform(0.0, 180.0);
    if (std::abs(theta_i - theta_t) < 25.0)
      theta_i = std::fmod(theta_t + 60.0, 180.0);

    const int noise_frames = 40, sig_frames = 30;
    const auto amps_in = random_amps(noise_frames, 200 + trial);
    const auto amps_is = random_amps(sig_frames, 300 + trial);
    const auto amps_t = random_amps(sig_frames, 400 + trial);

    Spectrogram spec;
    spec.bins = bins;
    spec.frames = noise_frames + sig_frames;
    spec.data.assign(M, std::vector<std::complex<double>>(
                            static_cast<size_t>(bins) * spec.frames));
    auto head = plane_wave_spec(g, theta_i, amps_in, bins, noise_frames);
    for (int ch = 0; ch < M; ++ch)
      std::copy(head.data[ch].begin(), head.data[ch].end(), spec.data[ch].begin());
    Spectrogram tail = plane_wave_spec(g, theta_t, amps_t, bins, sig_frames);
    add_plane_wave(tail, g, theta_i, amps_is);
    for (int ch = 0; ch < M; ++ch)
      std::copy(tail.data[ch].begin(), tail.data[ch].end(),
                spec.data[ch].begin() + static_cast<size_t>(bins) * noise_frames);

    MvdrConfig cfg;
    cfg.noise_frames_begin = 0;
    cfg.noise_frames_end = noise_frames;
    const auto w = mvdr_weights(spec, theta_t, g, cfg);

    // SINR via the response magnitudes summed over frequency.
    const int window_len = (bins - 1) * 2;
    double sinr_mvdr = 0.0, sinr_das = 0.0;
    for (int f = 2; f < bins; ++f) {
      const double freq = static_cast<double>(f) * kSampleRate / window_len;
      const auto at = steering_vector(g, theta_t, freq);
      const auto ai = steering_vector(g, theta_i, freq);
      std::complex<double> gt(0, 0), gi(0, 0), dt(0, 0), di(0, 0);
      for (int m = 0; m < M; ++m) {
        gt += std::conj(w[f][m]) * at[m];
        gi += std::conj(w[f][m]) * ai[m];
        dt += std::conj(at[m]) * at[m] / static_cast<double>(M);
        di += std::conj(at[m]) * ai[m] / static_cast<double>(M);
      }
      sinr_mvdr += std::norm(gt) / (std::norm(gi) + 1e-12);
      sinr_das += std::norm(dt) / (std::norm(di) + 1e-12);
    }
    if (sinr_mvdr >= sinr_das) ++wins;
  }
  CHECK(wins == 10);
}

TEST_CASE("sector_steer centers") {
  CHECK(sector_steer(0b000001, 6) == std::vector<double>{15.0});
  CHECK(sector_steer(0b100000, 6) == std::vector<double>{165.0});
  CHECK(sector_steer(0b100001, 6) == std::vector<double>{15.0, 165.0});
  CHECK(sector_steer(0b000000001, 9)[0] == doctest::Approx(10.0));
  CHECK_THROWS_AS(sector_steer(0, 6), Error);
}

TEST_CASE("geometry validation") {
  ArrayGeometry too_few;
  too_few.mic_positions = {{0, 0, 0}};
  CHECK_THROWS_AS(too_few.validate(), Error);
  ArrayGeometry wide;
  wide.mic_positions = {{0, 0, 0}, {0.5, 0, 0}};
  CHECK_THROWS_AS(wide.validate(), Error);
  CHECK_THROWS_AS(steering_vector(ArrayGeometry::circular(3), 0.0, 20000.0), Error);
  // Too few noise frames for the covariance rank.
  Spectrogram s;
  s.bins = 5;
  s.frames = 8;
  s.data.assign(4, std::vector<std::complex<double>>(40, {0.1, 0.0}));
  MvdrConfig cfg;
  cfg.noise_frames_begin = 0;
  cfg.noise_frames_end = 2;
  CHECK_THROWS_AS(mvdr(s, 10.0, ArrayGeometry::circular(4), cfg), Error);
}

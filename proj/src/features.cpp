#include "dsx/features.hpp"

#include <cmath>
#include <fstream>

#include "dsx/audio.hpp"

namespace dsx {

NormStats NormStats::neutral(int bins) {
  NormStats s;
  s.bins = bins;
  s.mean.assign(3, std::vector<double>(bins, 0.0));
  // var + epsilon == 1 exactly, so neutral normalization is the identity.
  s.var.assign(3, std::vector<double>(bins, 1.0 - s.epsilon));
  return s;
}

void NormStats::validate(int expected_bins) const {
  if (bins != expected_bins || mean.size() != 3 || var.size() != 3)
    fail(ErrorKind::Shape, "norm stats do not match spectrogram bins");
  for (int k = 0; k < 3; ++k) {
    if (static_cast<int>(mean[k].size()) != bins ||
        static_cast<int>(var[k].size()) != bins)
      fail(ErrorKind::Shape, "norm stats arrays have wrong length");
    for (double v : var[k])
      if (v < 0.0) fail(ErrorKind::Shape, "negative variance in norm stats");
  }
}

void interchannel_features(const Spectrogram& spec, std::vector<double>& ipd,
                           std::vector<double>& ild) {
  if (spec.channels() != 2) fail(ErrorKind::Shape, "need a 2-channel spectrogram");
  const size_t n = spec.data[0].size();
  if (spec.data[1].size() != n) fail(ErrorKind::Shape, "channel shape mismatch");
  ipd.resize(n);
  ild.resize(n);
  for (size_t i = 0; i < n; ++i) {
    const auto x1 = spec.data[0][i];
    const auto x2 = spec.data[1][i];
    const auto cross = x2 * std::conj(x1);
    double phi = std::atan2(cross.imag(), cross.real());
    if (phi <= -M_PI) phi += 2.0 * M_PI;
    ipd[i] = phi;
    const double m1 = std::max(std::abs(x1), kMagFloor);
    const double m2 = std::max(std::abs(x2), kMagFloor);
    ild[i] = 20.0 * std::log10(m2 / m1);
  }
}

namespace {

// cos/sin of the inter-channel phase from the normalized cross-spectrum.
// Floored denominators make silent bins contribute exact zeros.
inline void ipd_trig(const std::complex<double>& x1, const std::complex<double>& x2,
                     double& cos_ipd, double& sin_ipd) {
  const auto cross = x2 * std::conj(x1);
  const double m1 = std::max(std::abs(x1), kMagFloor);
  const double m2 = std::max(std::abs(x2), kMagFloor);
  cos_ipd = cross.real() / (m1 * m2);
  sin_ipd = cross.imag() / (m1 * m2);
}

}  // namespace

FeatureStack encode_features(const Spectrogram& spec, const NormStats& stats) {
  if (spec.channels() != 2) fail(ErrorKind::Shape, "need a 2-channel spectrogram");
  stats.validate(spec.bins);

  FeatureStack out;
  out.bins = spec.bins;
  out.frames = spec.frames;
  out.data.assign(kFeatChannels,
                  std::vector<double>(static_cast<size_t>(spec.bins) * spec.frames));

  for (int t = 0; t < spec.frames; ++t) {
    for (int f = 0; f < spec.bins; ++f) {
      const size_t i = static_cast<size_t>(t) * spec.bins + f;
      const auto x1 = spec.data[0][i];
      const auto x2 = spec.data[1][i];
      out.data[kFeatReX1][i] = x1.real();
      out.data[kFeatImX1][i] = x1.imag();
      out.data[kFeatReX2][i] = x2.real();
      out.data[kFeatImX2][i] = x2.imag();

      double c, s;
      ipd_trig(x1, x2, c, s);
      const double m1 = std::max(std::abs(x1), kMagFloor);
      const double m2 = std::max(std::abs(x2), kMagFloor);
      double ild = 20.0 * std::log10(m2 / m1);
      if (std::abs(x1) < kMagFloor && std::abs(x2) < kMagFloor) ild = 0.0;

      const double raw[3] = {c, s, ild};
      for (int k = 0; k < 3; ++k) {
        const double norm =
            (raw[k] - stats.mean[k][f]) / std::sqrt(stats.var[k][f] + stats.epsilon);
        out.data[kFeatCosIpd + k][i] = norm;
      }
    }
  }
  return out;
}

NormStats fit_norm_stats(const std::vector<std::string>& mixture_paths,
                         const FrameSpec& frame, int max_records) {
  if (mixture_paths.empty()) fail(ErrorKind::Resource, "empty manifest for stats");
  const int bins = frame.bins();

  NormStats stats;
  stats.bins = bins;
  stats.mean.assign(3, std::vector<double>(bins, 0.0));
  stats.var.assign(3, std::vector<double>(bins, 0.0));
  std::vector<std::vector<double>> m2(3, std::vector<double>(bins, 0.0));
  std::vector<long> count(bins, 0);

  const int limit = std::min<int>(max_records, static_cast<int>(mixture_paths.size()));
  for (int r = 0; r < limit; ++r) {
    const AudioBuffer buf = wav_read(mixture_paths[r]);
    if (buf.channels() != 2)
      fail(ErrorKind::Shape, "mixture is not 2-channel: " + mixture_paths[r]);
    const Spectrogram spec = stft(buf, frame);
    for (int t = 0; t < spec.frames; ++t) {
      for (int f = 0; f < bins; ++f) {
        const size_t i = static_cast<size_t>(t) * bins + f;
        const auto x1 = spec.data[0][i];
        const auto x2 = spec.data[1][i];
        double c, s;
        ipd_trig(x1, x2, c, s);
        const double m1 = std::max(std::abs(x1), kMagFloor);
        const double m2v = std::max(std::abs(x2), kMagFloor);
        double ild = 20.0 * std::log10(m2v / m1);
        if (std::abs(x1) < kMagFloor && std::abs(x2) < kMagFloor) ild = 0.0;

        const double raw[3] = {c, s, ild};
        ++count[f];
        for (int k = 0; k < 3; ++k) {
          const double delta = raw[k] - stats.mean[k][f];
          stats.mean[k][f] += delta / static_cast<double>(count[f]);
          m2[k][f] += delta * (raw[k] - stats.mean[k][f]);
        }
      }
    }
  }
  for (int f = 0; f < bins; ++f) {
    for (int k = 0; k < 3; ++k)
      stats.var[k][f] = count[f] > 0 ? m2[k][f] / static_cast<double>(count[f]) : 0.0;
  }
  return stats;
}

std::vector<std::complex<double>> signal_ratio(const std::vector<double>& x,
                                               const std::vector<double>& x_ref,
                                               const FrameSpec& frame) {
  if (x.size() != x_ref.size()) fail(ErrorKind::Shape, "signal length mismatch");
  AudioBuffer buf(2, x.size());
  buf.data[0] = x_ref;
  buf.data[1] = x;
  const Spectrogram spec = stft(buf, frame);

  std::vector<std::complex<double>> ratio(spec.bins, {0.0, 0.0});
  for (int f = 0; f < spec.bins; ++f) {
    std::complex<double> acc(0.0, 0.0);
    for (int t = 0; t < spec.frames; ++t) {
      const auto ref = spec.at(0, f, t);
      const auto sig = spec.at(1, f, t);
      const double den = std::max(std::abs(ref), kMagFloor);
      acc += sig * std::conj(ref) / (den * den);
    }
    ratio[f] = acc / static_cast<double>(spec.frames);
  }
  return ratio;
}

void norm_stats_to_csv(const NormStats& stats, const std::string& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) fail(ErrorKind::Io, "cannot write " + path);
  f << "bin,feature,mean,var\n";
  const char* names[3] = {"cos_ipd", "sin_ipd", "ild"};
  for (int k = 0; k < 3; ++k)
    for (int b = 0; b < stats.bins; ++b)
      f << b << ',' << names[k] << ',' << stats.mean[k][b] << ',' << stats.var[k][b]
        << '\n';
}

}  // namespace dsx

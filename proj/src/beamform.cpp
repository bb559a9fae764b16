#include "dsx/beamform.hpp"

#include <cmath>

namespace dsx {

void ArrayGeometry::validate() const {
  const int m = count();
  if (m < 2 || m > 6) fail(ErrorKind::Argument, "array needs 2..6 mics");
  for (int i = 0; i < m; ++i)
    for (int j = i + 1; j < m; ++j) {
      const auto& a = mic_positions[i];
      const auto& b = mic_positions[j];
      const double d = std::sqrt((a[0] - b[0]) * (a[0] - b[0]) +
                                 (a[1] - b[1]) * (a[1] - b[1]) +
                                 (a[2] - b[2]) * (a[2] - b[2]));
      if (d <= 0.0) fail(ErrorKind::Argument, "duplicate mic positions");
      if (d > 0.2) fail(ErrorKind::Argument, "aperture exceeds 0.2 m");
    }
}

ArrayGeometry ArrayGeometry::circular(int mics, double radius_m) {
  ArrayGeometry g;
  for (int m = 0; m < mics; ++m) {
    const double phi = 2.0 * M_PI * m / mics;
    g.mic_positions.push_back({radius_m * std::cos(phi), radius_m * std::sin(phi), 0.0});
  }
  g.validate();
  return g;
}

std::vector<std::complex<double>> steering_vector(const ArrayGeometry& geometry,
                                                  double theta_deg, double freq_hz) {
  if (freq_hz > 12000.0) fail(ErrorKind::Argument, "frequency above Nyquist");
  const int m = geometry.count();
  std::array<double, 3> centroid = {0, 0, 0};
  for (const auto& p : geometry.mic_positions)
    for (int d = 0; d < 3; ++d) centroid[d] += p[d] / m;

  const double a = theta_deg * M_PI / 180.0;
  const double ux = std::cos(a), uy = std::sin(a);

  std::vector<std::complex<double>> sv(m);
  for (int i = 0; i < m; ++i) {
    const auto& p = geometry.mic_positions[i];
    const double proj = (p[0] - centroid[0]) * ux + (p[1] - centroid[1]) * uy;
    const double tau = -proj / kSpeedOfSound;  // closer to the source => earlier
    const double phase = -2.0 * M_PI * freq_hz * tau;
    sv[i] = {std::cos(phase), std::sin(phase)};
  }
  return sv;
}

namespace {

double bin_freq(int f, int window_len) {
  return static_cast<double>(f) * kSampleRate / window_len;
}

}  // namespace

Spectrogram delay_and_sum(const Spectrogram& multichannel, double theta_deg,
                          const ArrayGeometry& geometry) {
  const int m = geometry.count();
  if (multichannel.channels() != m)
    fail(ErrorKind::Shape, "channel count does not match geometry");
  const int window_len = (multichannel.bins - 1) * 2;

  Spectrogram out;
  out.bins = multichannel.bins;
  out.frames = multichannel.frames;
  out.data.assign(1, std::vector<std::complex<double>>(
                         static_cast<size_t>(out.bins) * out.frames));

  for (int f = 0; f < multichannel.bins; ++f) {
    const auto a = steering_vector(geometry, theta_deg, bin_freq(f, window_len));
    for (int t = 0; t < multichannel.frames; ++t) {
      std::complex<double> acc(0.0, 0.0);
      for (int ch = 0; ch < m; ++ch)
        acc += std::conj(a[ch]) * multichannel.at(ch, f, t);
      out.at(0, f, t) = acc / static_cast<double>(m);
    }
  }
  return out;
}

namespace {

// Solve (M x M) complex system A w = b by Gaussian elimination with partial
// pivoting. A is overwritten.
std::vector<std::complex<double>> solve_complex(
    std::vector<std::vector<std::complex<double>>> a,
    std::vector<std::complex<double>> b) {
  const int n = static_cast<int>(a.size());
  for (int col = 0; col < n; ++col) {
    int pivot = col;
    double best = std::abs(a[col][col]);
    for (int r = col + 1; r < n; ++r)
      if (std::abs(a[r][col]) > best) {
        best = std::abs(a[r][col]);
        pivot = r;
      }
    if (best < 1e-300) fail(ErrorKind::Numerical, "singular covariance");
    std::swap(a[col], a[pivot]);
    std::swap(b[col], b[pivot]);
    const auto inv = 1.0 / a[col][col];
    for (int j = col; j < n; ++j) a[col][j] *= inv;
    b[col] *= inv;
    for (int r = 0; r < n; ++r) {
      if (r == col) continue;
      const auto factor = a[r][col];
      if (factor == std::complex<double>(0.0, 0.0)) continue;
      for (int j = col; j < n; ++j) a[r][j] -= factor * a[col][j];
      b[r] -= factor * b[col];
    }
  }
  return b;
}

}  // namespace

std::vector<std::vector<std::complex<double>>> mvdr_weights(
    const Spectrogram& multichannel, double theta_deg,
    const ArrayGeometry& geometry, const MvdrConfig& config) {
  const int m = geometry.count();
  if (multichannel.channels() != m)
    fail(ErrorKind::Shape, "channel count does not match geometry");
  const int n_noise = config.noise_frames_end - config.noise_frames_begin;
  if (n_noise < m)
    fail(ErrorKind::Argument, "need at least M noise frames for the covariance");
  const int window_len = (multichannel.bins - 1) * 2;

  std::vector<std::vector<std::complex<double>>> weights(
      multichannel.bins, std::vector<std::complex<double>>(m));

  std::vector<std::vector<std::complex<double>>> r(
      m, std::vector<std::complex<double>>(m));
  for (int f = 0; f < multichannel.bins; ++f) {
    for (auto& row : r) std::fill(row.begin(), row.end(), std::complex<double>(0, 0));
    for (int t = config.noise_frames_begin; t < config.noise_frames_end; ++t) {
      for (int i = 0; i < m; ++i) {
        const auto xi = multichannel.at(i, f, t);
        for (int j = 0; j < m; ++j)
          r[i][j] += xi * std::conj(multichannel.at(j, f, t));
      }
    }
    double trace = 0.0;
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < m; ++j) r[i][j] /= static_cast<double>(n_noise);
      trace += r[i][i].real();
    }
    const double load = config.diagonal_loading * std::max(trace, 1e-12) / m;
    for (int i = 0; i < m; ++i) r[i][i] += load;

    const auto a = steering_vector(geometry, theta_deg, bin_freq(f, window_len));
    auto r_inv_a = solve_complex(r, a);
    std::complex<double> denom(0.0, 0.0);
    for (int i = 0; i < m; ++i) denom += std::conj(a[i]) * r_inv_a[i];
    if (std::abs(denom) < 1e-300) fail(ErrorKind::Numerical, "degenerate MVDR denom");
    for (int i = 0; i < m; ++i) weights[f][i] = r_inv_a[i] / denom;
  }
  return weights;
}

Spectrogram mvdr(const Spectrogram& multichannel, double theta_deg,
                 const ArrayGeometry& geometry, const MvdrConfig& config) {
  const auto weights = mvdr_weights(multichannel, theta_deg, geometry, config);
  const int m = geometry.count();

  Spectrogram out;
  out.bins = multichannel.bins;
  out.frames = multichannel.frames;
  out.data.assign(1, std::vector<std::complex<double>>(
                         static_cast<size_t>(out.bins) * out.frames));
  for (int f = 0; f < multichannel.bins; ++f) {
    for (int t = 0; t < multichannel.frames; ++t) {
      std::complex<double> acc(0.0, 0.0);
      for (int ch = 0; ch < m; ++ch)
        acc += std::conj(weights[f][ch]) * multichannel.at(ch, f, t);
      out.at(0, f, t) = acc;
    }
  }
  return out;
}

std::vector<double> sector_steer(uint32_t selected_sectors, int n_sectors) {
  if (selected_sectors == 0) fail(ErrorKind::Argument, "empty sector selection");
  std::vector<double> angles;
  for (int i = 1; i <= n_sectors; ++i)
    if (selected_sectors & (1u << (i - 1)))
      angles.push_back((i - 0.5) * (180.0 / n_sectors));
  return angles;
}

}  // namespace dsx

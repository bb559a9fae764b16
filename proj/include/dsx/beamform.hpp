#pragma once

#include <array>
#include <complex>
#include <vector>

#include "dsx/common.hpp"
#include "dsx/stft.hpp"

namespace dsx {

// Microphone positions in the device frame (meters, z up).
struct ArrayGeometry {
  std::vector<std::array<double, 3>> mic_positions;

  int count() const { return static_cast<int>(mic_positions.size()); }
  void validate() const;

  // Uniform circular array in the horizontal plane.
  static ArrayGeometry circular(int mics, double radius_m = 0.05);
};

// Far-field plane-wave steering: a_m = exp(-j 2 pi f tau_m(theta)) with
// delays relative to the array centroid; |a_m| == 1.
std::vector<std::complex<double>> steering_vector(const ArrayGeometry& geometry,
                                                  double theta_deg, double freq_hz);

// Bartlett beamformer: Y = a^H X / M per (f, t).
Spectrogram delay_and_sum(const Spectrogram& multichannel, double theta_deg,
                          const ArrayGeometry& geometry);

// MVDR with noise covariance estimated from the given frame range and
// diagonal loading delta * tr(R)/M.
struct MvdrConfig {
  int noise_frames_begin = 0;
  int noise_frames_end = 0;  // exclusive
  double diagonal_loading = 1e-3;
};

Spectrogram mvdr(const Spectrogram& multichannel, double theta_deg,
                 const ArrayGeometry& geometry, const MvdrConfig& config);

// Per-frequency MVDR weights for one look angle (exposed for the
// distortionless-constraint checks).
std::vector<std::vector<std::complex<double>>> mvdr_weights(
    const Spectrogram& multichannel, double theta_deg,
    const ArrayGeometry& geometry, const MvdrConfig& config);

// Center angles of the selected sectors: (i - 0.5) * 180 / n.
std::vector<double> sector_steer(uint32_t selected_sectors, int n_sectors);

}  // namespace dsx

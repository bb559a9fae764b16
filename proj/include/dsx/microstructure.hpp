#pragma once

#include <complex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dsx/common.hpp"

namespace dsx {

// Second-order peaking response riding on one hole's path: unit gain far
// from resonance, gain_db at f0, bandwidth set by q.
struct ResonatorSpec {
  double f0_hz = 0.0;
  double q = 1.0;
  double gain_db = 0.0;
};

struct HoleSpec {
  double azimuth_deg = 0.0;
  double tube_length_m = 0.0;
  std::optional<ResonatorSpec> resonator;
};

// Parametric model of the coded-hole cylinder. Each hole is a cosine-lobe
// directional port with a tube delay and an optional resonant peak; the
// wall contributes a constant leakage floor.
struct MicrostructureSpec {
  double diameter_m = 0.020;
  std::vector<HoleSpec> holes;
  double wall_leakage_db = -33.0;
  double directivity_exponent = 2.0;

  void validate() const;

  // The shipped six-hole 20 mm design: delays and resonances spread across
  // the 1-4 kHz intelligibility band.
  static MicrostructureSpec default_six_hole();
  // Angle-independent control: leakage floor only, no holes.
  static MicrostructureSpec flat();
  // Geometrically scaled variant (tube lengths scale with the body,
  // resonant frequencies scale inversely).
  static MicrostructureSpec scaled(const MicrostructureSpec& base, double factor);
};

// Complex frequency response of the structure for arrival angle theta.
std::complex<double> direction_response(const MicrostructureSpec& spec,
                                        double theta_deg, double freq_hz);

// FIR realization of the response, linear-phase centered at taps/2.
// taps must be a power of two >= 64; theta in [0, 360).
std::vector<double> direction_filter(const MicrostructureSpec& spec,
                                     double theta_deg, int taps);

struct DirectionFilterBank {
  MicrostructureSpec spec;
  std::vector<double> angle_grid_deg;        // sorted
  int taps = 256;
  int center = 128;                          // group delay of every FIR
  std::vector<std::vector<double>> filters;  // one FIR per grid angle

  // Nearest grid angle after folding to [0, 180].
  int nearest_index(double theta_deg) const;
};

std::vector<double> default_angle_grid();  // 0..180 step 1

DirectionFilterBank realize_bank(const MicrostructureSpec& spec,
                                 const std::vector<double>& angle_grid_deg,
                                 int taps = 256);

// A bank whose every FIR is a unit impulse (identity filtering).
DirectionFilterBank unit_bank(const std::vector<double>& angle_grid_deg,
                              int taps = 256);

// Magnitude response of one FIR sampled at arbitrary frequencies.
std::vector<double> fir_magnitude(const std::vector<double>& fir,
                                  const std::vector<double>& freq_hz);

// Population variance of |M_theta(f)| across the grid, per frequency (Eq. of
// the design objective: spatial diversity).
std::vector<double> spatial_diversity(const DirectionFilterBank& bank,
                                      const std::vector<double>& freq_hz);

// L2 distance between magnitude responses of angle pairs over [f_lo, f_hi].
std::vector<std::vector<double>> pairwise_distance_map(
    const DirectionFilterBank& bank, double f_lo, double f_hi);

struct DesignSummary {
  std::string name;
  double mean_diversity = 0.0;
  double mean_pairwise_distance = 0.0;
};

// Evaluate each candidate over the band and rank by mean diversity
// (descending, stable on ties).
std::vector<DesignSummary> design_sweep(
    const std::vector<std::pair<std::string, MicrostructureSpec>>& specs,
    double f_lo, double f_hi);

// Fold [0, 360) onto the characterized semicircle [0, 180].
double fold_angle_deg(double theta_deg);

}  // namespace dsx

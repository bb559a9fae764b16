#pragma once

#include <string>
#include <vector>

#include "dsx/common.hpp"
#include "dsx/stft.hpp"

namespace dsx {

// Channel layout of the encoded stack, in order.
enum FeatureChannel {
  kFeatReX1 = 0,
  kFeatImX1 = 1,
  kFeatReX2 = 2,
  kFeatImX2 = 3,
  kFeatCosIpd = 4,
  kFeatSinIpd = 5,
  kFeatIld = 6,
  kFeatChannels = 7,
};

struct FeatureStack {
  int channels = kFeatChannels;
  int bins = 0;
  int frames = 0;
  // [channel][t * bins + f]
  std::vector<std::vector<double>> data;

  double& at(int ch, int f, int t) { return data[ch][static_cast<size_t>(t) * bins + f]; }
  double at(int ch, int f, int t) const {
    return data[ch][static_cast<size_t>(t) * bins + f];
  }
};

// Per-frequency normalization statistics for the three spatial channels
// {cos IPD, sin IPD, ILD}, fitted on training data.
struct NormStats {
  int bins = 0;
  double epsilon = 1e-5;
  // [feature][bin], feature order: cos IPD, sin IPD, ILD
  std::vector<std::vector<double>> mean;
  std::vector<std::vector<double>> var;

  static NormStats neutral(int bins);  // mean 0, var 1
  void validate(int expected_bins) const;
};

inline constexpr double kMagFloor = 1e-8;

// IPD = angle(X2) - angle(X1) wrapped to (-pi, pi];
// ILD = 20*log10(|X2| / |X1|) with both magnitudes floored.
// Shapes: per-channel spectrogram planes of equal size.
void interchannel_features(const Spectrogram& spec, std::vector<double>& ipd,
                           std::vector<double>& ild);

// Full 7-channel stack. The trigonometric IPD channels are computed from the
// normalized cross-spectrum (floored denominators), so cos^2 + sin^2 == 1
// wherever both channels carry energy and all spatial features vanish on
// silence. Spatial channels are normalized per frequency with `stats`;
// real/imaginary channels pass through.
FeatureStack encode_features(const Spectrogram& spec, const NormStats& stats);

// Streaming (Welford) per-frequency moments of the raw spatial features over
// up to max_records manifest mixtures, in manifest order.
NormStats fit_norm_stats(const std::vector<std::string>& mixture_paths,
                         const FrameSpec& frame, int max_records);

// Eq.-style two-microphone diagnostic: per-(f,t) ratio X/X_ref with floored
// denominator, averaged over frames.
std::vector<std::complex<double>> signal_ratio(const std::vector<double>& x,
                                               const std::vector<double>& x_ref,
                                               const FrameSpec& frame);

void norm_stats_to_csv(const NormStats& stats, const std::string& path);

}  // namespace dsx

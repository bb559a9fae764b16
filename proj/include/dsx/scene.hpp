#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "dsx/audio.hpp"
#include "dsx/common.hpp"
#include "dsx/microstructure.hpp"

namespace dsx {

using Vec3 = std::array<double, 3>;

struct RoomSpec {
  Vec3 dims = {6.0, 4.0, 3.0};  // Lx, Ly, Lz
  double absorption = 0.4;      // alpha in (0, 1], all six walls
  int max_order = 3;            // sum |i|+|j|+|k|

  void validate() const;
  bool contains(const Vec3& p) const;
};

struct ImageSource {
  Vec3 pos;
  double gain;  // reflection attenuation, sqrt(1-alpha)^order
};

// Shoebox image enumeration over |i|+|j|+|k| <= max_order.
std::vector<ImageSource> image_sources(const RoomSpec& room, const Vec3& src,
                                       int max_order);

// Impulse response src -> mic: each image contributes gain/(4*pi*d) at
// fractional delay d/c*fs through a 31-tap windowed-sinc pulse.
std::vector<double> render_rir(const RoomSpec& room, const Vec3& src,
                               const Vec3& mic, int max_order);

struct ReceiverRig {
  Vec3 ref_mic_pos = {0, 0, 0};
  Vec3 struct_mic_pos = {0, 0, 0};
  double orientation_deg = 0.0;  // device heading; 0 = sector-1 edge
  std::vector<Vec3> array_positions;  // world positions, optional
};

enum class SourceRole { Target, Interferer };

struct SceneSource {
  std::string signal_id;
  Vec3 position;
  SourceRole role = SourceRole::Target;
};

struct SceneSpec {
  RoomSpec room;
  ReceiverRig rig;
  std::vector<SceneSource> sources;
  uint64_t seed = 0;

  void validate() const;
};

// Azimuth of a world point in the rig's device frame, in [0, 360).
double device_azimuth_deg(const ReceiverRig& rig, const Vec3& point);

// Sector index in [1, n_sectors] of a device-frame angle in [0, 180).
int sector_of(double angle_deg, int n_sectors);

struct RenderedScene {
  std::vector<double> ref_channel;
  std::vector<double> struct_channel;
  std::vector<std::vector<double>> array_channels;
  // Each source rendered alone at the reference mic, for ground truth.
  std::vector<std::vector<double>> per_source_clean_ref;
};

// Renders a scene. The structure channel applies the bank per arrival: every
// image source of every sound source is filtered by the FIR of its own
// arrival angle at the rig, so reflections carry their own directional
// signature. The reference channel and array channels use plain responses.
// The bank's linear-phase center is compensated, so a unit bank reproduces a
// plain rendering at the structure mic position.
RenderedScene render_scene(const SceneSpec& scene,
                           const std::map<std::string, std::vector<double>>& signals,
                           const DirectionFilterBank& bank, size_t out_len);

}  // namespace dsx

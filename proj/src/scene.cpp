#include "dsx/scene.hpp"

#include <cmath>

#include "dsx/dsp.hpp"

namespace dsx {

void RoomSpec::validate() const {
  for (double d : dims)
    if (d < 2.0 || d > 20.0) fail(ErrorKind::Argument, "room dims outside [2, 20] m");
  if (absorption <= 0.0 || absorption > 1.0)
    fail(ErrorKind::Argument, "absorption outside (0, 1]");
  if (max_order < 0 || max_order > 6)
    fail(ErrorKind::Argument, "max_order outside [0, 6]");
}

bool RoomSpec::contains(const Vec3& p) const {
  for (int i = 0; i < 3; ++i)
    if (p[i] <= 0.0 || p[i] >= dims[i]) return false;
  return true;
}

void SceneSpec::validate() const {
  room.validate();
  if (!room.contains(rig.ref_mic_pos) || !room.contains(rig.struct_mic_pos))
    fail(ErrorKind::Argument, "rig outside room");
  for (const auto& p : rig.array_positions)
    if (!room.contains(p)) fail(ErrorKind::Argument, "array mic outside room");
  for (const auto& s : sources)
    if (!room.contains(s.position)) fail(ErrorKind::Argument, "source outside room");
}

std::vector<ImageSource> image_sources(const RoomSpec& room, const Vec3& src,
                                       int max_order) {
  room.validate();
  if (!room.contains(src)) fail(ErrorKind::Argument, "source outside room");
  const double refl = std::sqrt(1.0 - room.absorption);

  std::vector<ImageSource> out;
  for (int i = -max_order; i <= max_order; ++i) {
    for (int j = -max_order; j <= max_order; ++j) {
      for (int k = -max_order; k <= max_order; ++k) {
        const int order = std::abs(i) + std::abs(j) + std::abs(k);
        if (order > max_order) continue;
        Vec3 p;
        const int idx[3] = {i, j, k};
        for (int d = 0; d < 3; ++d) {
          const int m = idx[d];
          p[d] = (m % 2 == 0)
                     ? static_cast<double>(m) * room.dims[d] + src[d]
                     : static_cast<double>(m + 1) * room.dims[d] - src[d];
        }
        out.push_back({p, std::pow(refl, order)});
      }
    }
  }
  return out;
}

namespace {

double distance(const Vec3& a, const Vec3& b) {
  return std::sqrt((a[0] - b[0]) * (a[0] - b[0]) + (a[1] - b[1]) * (a[1] - b[1]) +
                   (a[2] - b[2]) * (a[2] - b[2]));
}

constexpr int kPulseHalf = 15;

// Accumulate an interpolated pulse of the given amplitude at a fractional
// sample position into an impulse-response buffer.
void add_pulse(std::vector<double>& rir, double delay_samples, double amp) {
  const long m = static_cast<long>(std::floor(delay_samples));
  const double mu = delay_samples - static_cast<double>(m);
  const auto kernel = frac_delay_kernel(mu);
  for (int k = -kPulseHalf; k <= kPulseHalf; ++k) {
    const long n = m + k;
    if (n >= 0 && n < static_cast<long>(rir.size()))
      rir[n] += amp * kernel[k + kPulseHalf];
  }
}

size_t rir_length_for(const std::vector<ImageSource>& images, const Vec3& mic) {
  double max_d = 0.0;
  for (const auto& im : images) max_d = std::max(max_d, distance(im.pos, mic));
  return static_cast<size_t>(std::ceil(max_d / kSpeedOfSound * kSampleRate)) +
         kPulseHalf + 2;
}

}  // namespace

std::vector<double> render_rir(const RoomSpec& room, const Vec3& src,
                               const Vec3& mic, int max_order) {
  const auto images = image_sources(room, src, max_order);
  std::vector<double> rir(rir_length_for(images, mic), 0.0);
  for (const auto& im : images) {
    const double d = distance(im.pos, mic);
    add_pulse(rir, d / kSpeedOfSound * kSampleRate, im.gain / (4.0 * M_PI * d));
  }
  return rir;
}

double device_azimuth_deg(const ReceiverRig& rig, const Vec3& point) {
  const Vec3 center = {(rig.ref_mic_pos[0] + rig.struct_mic_pos[0]) / 2.0,
                       (rig.ref_mic_pos[1] + rig.struct_mic_pos[1]) / 2.0,
                       (rig.ref_mic_pos[2] + rig.struct_mic_pos[2]) / 2.0};
  const double world =
      std::atan2(point[1] - center[1], point[0] - center[0]) * 180.0 / M_PI;
  double dev = world - rig.orientation_deg;
  dev = std::fmod(dev, 360.0);
  if (dev < 0.0) dev += 360.0;
  return dev;
}

int sector_of(double angle_deg, int n_sectors) {
  if (n_sectors != 6 && n_sectors != 9)
    fail(ErrorKind::Argument, "n_sectors must be 6 or 9");
  if (angle_deg < 0.0 || angle_deg >= 180.0)
    fail(ErrorKind::Argument, "sector_of: angle outside [0, 180); fold first");
  return static_cast<int>(std::floor(angle_deg / (180.0 / n_sectors))) + 1;
}

RenderedScene render_scene(const SceneSpec& scene,
                           const std::map<std::string, std::vector<double>>& signals,
                           const DirectionFilterBank& bank, size_t out_len) {
  scene.validate();
  RenderedScene out;
  out.ref_channel.assign(out_len, 0.0);
  out.struct_channel.assign(out_len, 0.0);
  out.array_channels.assign(scene.rig.array_positions.size(),
                            std::vector<double>(out_len, 0.0));

  auto accumulate = [out_len](std::vector<double>& dst, const std::vector<double>& src) {
    const size_t n = std::min(out_len, src.size());
    for (size_t i = 0; i < n; ++i) dst[i] += src[i];
  };

  for (const auto& source : scene.sources) {
    auto it = signals.find(source.signal_id);
    if (it == signals.end())
      fail(ErrorKind::Lookup, "unknown signal id: " + source.signal_id);
    const auto& sig = it->second;

    const auto images = image_sources(scene.room, source.position, scene.room.max_order);

    // Reference channel + per-source ground truth.
    {
      std::vector<double> rir(rir_length_for(images, scene.rig.ref_mic_pos), 0.0);
      for (const auto& im : images) {
        const double d = distance(im.pos, scene.rig.ref_mic_pos);
        add_pulse(rir, d / kSpeedOfSound * kSampleRate, im.gain / (4.0 * M_PI * d));
      }
      auto rendered = convolve(sig, rir);
      rendered.resize(out_len, 0.0);
      accumulate(out.ref_channel, rendered);
      out.per_source_clean_ref.push_back(std::move(rendered));
    }

    // Structure channel: group arrivals by their nearest grid angle, build
    // one sub-response per angle, filter it, and advance by the bank's
    // linear-phase center.
    {
      const size_t base_len = rir_length_for(images, scene.rig.struct_mic_pos);
      std::map<int, std::vector<double>> per_angle;
      for (const auto& im : images) {
        const double d = distance(im.pos, scene.rig.struct_mic_pos);
        const double az = device_azimuth_deg(scene.rig, im.pos);
        const int idx = bank.nearest_index(az);
        auto& sub = per_angle[idx];
        if (sub.empty()) sub.assign(base_len, 0.0);
        add_pulse(sub, d / kSpeedOfSound * kSampleRate, im.gain / (4.0 * M_PI * d));
      }
      std::vector<double> struct_rir(base_len + bank.taps, 0.0);
      for (const auto& [idx, sub] : per_angle) {
        const auto filtered = convolve(sub, bank.filters[idx]);
        // Advance by the bank center; taps before it are pre-ring only.
        for (size_t n = bank.center; n < filtered.size(); ++n) {
          const size_t m = n - bank.center;
          if (m < struct_rir.size()) struct_rir[m] += filtered[n];
        }
      }
      auto rendered = convolve(sig, struct_rir);
      rendered.resize(out_len, 0.0);
      accumulate(out.struct_channel, rendered);
    }

    // Plain array channels.
    for (size_t a = 0; a < scene.rig.array_positions.size(); ++a) {
      std::vector<double> rir(rir_length_for(images, scene.rig.array_positions[a]), 0.0);
      for (const auto& im : images) {
        const double d = distance(im.pos, scene.rig.array_positions[a]);
        add_pulse(rir, d / kSpeedOfSound * kSampleRate, im.gain / (4.0 * M_PI * d));
      }
      auto rendered = convolve(sig, rir);
      rendered.resize(out_len, 0.0);
      accumulate(out.array_channels[a], rendered);
    }
  }
  return out;
}

}  // namespace dsx

#include "dsx/mixgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "dsx/audio.hpp"
#include "dsx/dsp.hpp"
#include "dsx/features.hpp"
#include "dsx/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace dsx {

void MixtureManifest::validate() const {
  for (const auto& r : records) {
    if (r.selected_sectors == 0)
      fail(ErrorKind::Argument, "record with empty sector selection: " + r.id);
    if (r.selected_sectors >> r.n_sectors)
      fail(ErrorKind::Argument, "selection bits beyond n_sectors: " + r.id);
    for (const auto& s : r.per_source) {
      if (s.sector < 1 || s.sector > r.n_sectors)
        fail(ErrorKind::Argument, "source sector out of range: " + r.id);
    }
  }
}

std::vector<uint32_t> sector_combinations(int n_sectors, int max_targets) {
  std::vector<uint32_t> combos;
  for (int k = 1; k <= max_targets; ++k) {
    std::vector<int> idx(k);
    for (int i = 0; i < k; ++i) idx[i] = i;
    while (true) {
      uint32_t mask = 0;
      for (int i : idx) mask |= 1u << i;
      combos.push_back(mask);
      int p = k - 1;
      while (p >= 0 && idx[p] == n_sectors - k + p) --p;
      if (p < 0) break;
      ++idx[p];
      for (int q = p + 1; q < k; ++q) idx[q] = idx[q - 1] + 1;
    }
  }
  return combos;
}

namespace {

struct RigPlacement {
  ReceiverRig rig;
  std::string room_id;
  std::string rig_id;
  int room_index = 0;
};

Vec3 rotate_device(const Vec3& v, double heading_deg) {
  const double a = heading_deg * M_PI / 180.0;
  return {v[0] * std::cos(a) - v[1] * std::sin(a),
          v[0] * std::sin(a) + v[1] * std::cos(a), v[2]};
}

ReceiverRig make_rig(const RoomSpec& room, const GenConfig& cfg, Rng& rng) {
  ReceiverRig rig;
  Vec3 center = {room.dims[0] * rng.uniform(0.35, 0.65),
                 room.dims[1] * rng.uniform(0.35, 0.65),
                 std::min(room.dims[2] - 0.5, rng.uniform(0.9, 1.3))};
  rig.orientation_deg = rng.uniform(0.0, 360.0);
  const Vec3 axis = rotate_device({1, 0, 0}, rig.orientation_deg);
  const double half = cfg.mic_separation_m / 2.0;
  rig.ref_mic_pos = {center[0] - axis[0] * half, center[1] - axis[1] * half,
                     center[2]};
  rig.struct_mic_pos = {center[0] + axis[0] * half, center[1] + axis[1] * half,
                        center[2]};
  if (cfg.render_array) {
    for (int m = 0; m < cfg.array_mics; ++m) {
      const double phi = 360.0 * m / cfg.array_mics;
      const Vec3 dev = {cfg.array_radius_m * std::cos(phi * M_PI / 180.0),
                        cfg.array_radius_m * std::sin(phi * M_PI / 180.0), 0.0};
      const Vec3 w = rotate_device(dev, rig.orientation_deg);
      rig.array_positions.push_back(
          {center[0] + w[0], center[1] + w[1], center[2] + w[2]});
    }
  }
  return rig;
}

Vec3 rig_center(const ReceiverRig& rig) {
  return {(rig.ref_mic_pos[0] + rig.struct_mic_pos[0]) / 2.0,
          (rig.ref_mic_pos[1] + rig.struct_mic_pos[1]) / 2.0,
          (rig.ref_mic_pos[2] + rig.struct_mic_pos[2]) / 2.0};
}

// Distance from `center` along the horizontal ray at world angle `ang` to the
// nearest wall, minus a safety margin.
double max_ray_distance(const RoomSpec& room, const Vec3& center, double ang_deg) {
  const double a = ang_deg * M_PI / 180.0;
  const double dx = std::cos(a), dy = std::sin(a);
  double t = 1e9;
  const double margin = 0.25;
  if (dx > 1e-9) t = std::min(t, (room.dims[0] - margin - center[0]) / dx);
  if (dx < -1e-9) t = std::min(t, (margin - center[0]) / dx);
  if (dy > 1e-9) t = std::min(t, (room.dims[1] - margin - center[1]) / dy);
  if (dy < -1e-9) t = std::min(t, (margin - center[1]) / dy);
  return std::max(0.0, t);
}

// Place a source inside the given sector of the device frame.
bool place_in_sector(const RoomSpec& room, const ReceiverRig& rig, int sector,
                     int n_sectors, const GenConfig& cfg, Rng& rng, Vec3& pos,
                     double& angle_dev) {
  const double width = 180.0 / n_sectors;
  const Vec3 center = rig_center(rig);
  for (int attempt = 0; attempt < 64; ++attempt) {
    angle_dev = (sector - 1) * width + rng.uniform(0.02, 0.98) * width;
    const double world = rig.orientation_deg + angle_dev;
    const double reach = max_ray_distance(room, center, world);
    if (reach < cfg.dist_lo_m) continue;
    const double d = rng.uniform(cfg.dist_lo_m, std::min(cfg.dist_hi_m, reach));
    const double a = world * M_PI / 180.0;
    pos = {center[0] + d * std::cos(a), center[1] + d * std::sin(a), center[2]};
    if (room.contains(pos)) return true;
  }
  return false;
}

std::vector<double> clip_segment(const CorpusClip& clip, size_t needed, Rng& rng) {
  const AudioBuffer buf = wav_read(clip.path);
  const auto& x = buf[0];
  if (x.size() < needed)
    fail(ErrorKind::Resource, "clip shorter than required segment: " + clip.id);
  const size_t max_off = x.size() - needed;
  const size_t off = max_off ? rng.uniform_index(max_off + 1) : 0;
  std::vector<double> seg(x.begin() + off, x.begin() + off + needed);
  peak_normalize(seg, 0.5);
  return seg;
}

}  // namespace

MixtureManifest generate_mixtures(const std::vector<CorpusClip>& corpus,
                                  const std::vector<RoomSpec>& rooms,
                                  const GenConfig& config,
                                  const DirectionFilterBank& bank,
                                  const std::string& out_dir, uint64_t seed) {
  if (corpus.empty()) fail(ErrorKind::Resource, "empty corpus");
  if (rooms.empty()) fail(ErrorKind::Argument, "no rooms");
  if (config.max_targets < 1 || config.max_targets > 3)
    fail(ErrorKind::Argument, "max_targets outside [1, 3]");
  if (config.n_sectors != 6 && config.n_sectors != 9)
    fail(ErrorKind::Argument, "n_sectors must be 6 or 9");

  fs::create_directories(fs::path(out_dir) / "wav");

  // Rig placements are drawn per room from the manifest seed.
  std::vector<RigPlacement> rigs;
  for (size_t r = 0; r < rooms.size(); ++r) {
    for (int j = 0; j < config.rigs_per_room; ++j) {
      Rng rng(hash_seed(seed, 0xA1900000ULL + r * 64 + j));
      RigPlacement p;
      p.rig = make_rig(rooms[r], config, rng);
      p.room_index = static_cast<int>(r);
      p.room_id = "room" + std::to_string(r);
      p.rig_id = p.room_id + "_rig" + std::to_string(j);
      rigs.push_back(std::move(p));
    }
  }

  const auto combos = sector_combinations(config.n_sectors, config.max_targets);
  auto repeats_for = [&config](uint32_t combo) {
    const int k = __builtin_popcount(combo);
    if (!config.clips_per_combo_by_k.empty()) {
      if (k - 1 < static_cast<int>(config.clips_per_combo_by_k.size()))
        return config.clips_per_combo_by_k[k - 1];
      return config.clips_per_combo_by_k.back();
    }
    return config.clips_per_combo;
  };
  const size_t seg_len = static_cast<size_t>(config.duration_s * kSampleRate);
  const size_t head_len = static_cast<size_t>(config.noise_head_s * kSampleRate);
  if (head_len >= seg_len) fail(ErrorKind::Argument, "noise head exceeds duration");

  MixtureManifest manifest;
  manifest.base_dir = out_dir;
  manifest.seed = seed;
  manifest.prng_algorithm = kPrngAlgorithm;
  manifest.noise_head_s = config.noise_head_s;

  size_t record_index = 0;
  for (uint32_t combo : combos) {
    const int repeats = repeats_for(combo);
    for (int rep = 0; rep < repeats; ++rep, ++record_index) {
      const uint64_t rec_seed = hash_seed(seed, record_index);
      Rng rng(rec_seed);
      const RigPlacement& rp = rigs[record_index % rigs.size()];
      const RoomSpec& room = rooms[rp.room_index];

      MixtureRecord rec;
      char idbuf[32];
      std::snprintf(idbuf, sizeof(idbuf), "mix_%05zu", record_index);
      rec.id = idbuf;
      rec.n_sectors = config.n_sectors;
      rec.selected_sectors = combo;
      rec.room_id = rp.room_id;
      rec.rig_id = rp.rig_id;
      rec.seed = rec_seed;

      const bool empty_target = rng.uniform() < config.empty_target_rate;

      // Pick clips without replacement within the record.
      std::vector<size_t> used;
      auto draw_clip = [&]() -> size_t {
        if (used.size() >= corpus.size())
          fail(ErrorKind::Resource, "corpus exhausted for record " + rec.id);
        while (true) {
          const size_t c = rng.uniform_index(corpus.size());
          if (std::find(used.begin(), used.end(), c) == used.end()) {
            used.push_back(c);
            return c;
          }
        }
      };

      SceneSpec scene;
      scene.room = room;
      scene.rig = rp.rig;
      scene.seed = rec_seed;

      struct Placed {
        bool is_target;
        double snr_db;
      };
      std::vector<Placed> placed_meta;

      std::map<std::string, std::vector<double>> signals;

      // Targets: one source per selected sector.
      if (!empty_target) {
        for (int s = 1; s <= config.n_sectors; ++s) {
          if (!(combo & (1u << (s - 1)))) continue;
          Vec3 pos;
          double angle;
          if (!place_in_sector(room, rp.rig, s, config.n_sectors, config, rng, pos,
                               angle))
            fail(ErrorKind::Resource, "cannot place target source in " + rec.id);
          const size_t c = draw_clip();
          auto seg = clip_segment(corpus[c], seg_len - head_len, rng);
          std::vector<double> sig(seg_len, 0.0);
          std::copy(seg.begin(), seg.end(), sig.begin() + head_len);

          const std::string sig_key =
              corpus[c].id + "#" + std::to_string(scene.sources.size());
          signals[sig_key] = std::move(sig);
          scene.sources.push_back({sig_key, pos, SourceRole::Target});
          rec.per_source.push_back({angle, s, 0.0, corpus[c].id});
          placed_meta.push_back({true, 0.0});
        }
      }

      // Interferers in unselected sectors.
      std::vector<int> unselected;
      for (int s = 1; s <= config.n_sectors; ++s)
        if (!(combo & (1u << (s - 1)))) unselected.push_back(s);
      for (size_t i = unselected.size(); i > 1; --i)
        std::swap(unselected[i - 1], unselected[rng.uniform_index(i)]);

      const int n_interf = static_cast<int>(
          rng.uniform_int(config.interferers_lo, config.interferers_hi));
      for (int i = 0; i < n_interf && i < static_cast<int>(unselected.size()); ++i) {
        const int s = unselected[i];
        Vec3 pos;
        double angle;
        if (!place_in_sector(room, rp.rig, s, config.n_sectors, config, rng, pos,
                             angle))
          fail(ErrorKind::Resource, "cannot place interferer in " + rec.id);
        const size_t c = draw_clip();
        auto sig = clip_segment(corpus[c], seg_len, rng);
        const double snr = rng.uniform(config.snr_lo_db, config.snr_hi_db);

        const std::string sig_key =
            corpus[c].id + "#" + std::to_string(scene.sources.size());
        signals[sig_key] = std::move(sig);
        scene.sources.push_back({sig_key, pos, SourceRole::Interferer});
        rec.per_source.push_back({angle, s, snr, corpus[c].id});
        placed_meta.push_back({false, snr});
      }

      // Render each source alone so interferer gains can be applied per
      // source before summation.
      std::vector<RenderedScene> solo_renders;
      solo_renders.reserve(scene.sources.size());
      for (size_t i = 0; i < scene.sources.size(); ++i) {
        SceneSpec solo = scene;
        solo.sources = {scene.sources[i]};
        solo_renders.push_back(render_scene(solo, signals, bank, seg_len));
      }

      // Scale interferers to their drawn SNR against the summed target (or
      // against the first interferer when the selection is empty).
      std::vector<double> target_ref(seg_len, 0.0);
      for (size_t i = 0; i < placed_meta.size(); ++i)
        if (placed_meta[i].is_target)
          for (size_t n = 0; n < seg_len; ++n)
            target_ref[n] += solo_renders[i].ref_channel[n];

      std::vector<double> gains(placed_meta.size(), 1.0);
      for (size_t i = 0; i < placed_meta.size(); ++i) {
        if (placed_meta[i].is_target) continue;
        const std::vector<double>& interf = solo_renders[i].ref_channel;
        if (!empty_target) {
          gains[i] = scale_to_snr(target_ref, interf, placed_meta[i].snr_db);
        } else if (i > 0) {
          gains[i] =
              scale_to_snr(solo_renders[0].ref_channel, interf, placed_meta[i].snr_db);
        }
      }

      AudioBuffer mix(2, seg_len);
      AudioBuffer target(1, seg_len);
      AudioBuffer array_buf(config.render_array ? config.array_mics : 0, seg_len);

      for (size_t i = 0; i < scene.sources.size(); ++i) {
        const RenderedScene& rs = solo_renders[i];
        const double g = gains[i];
        for (size_t n = 0; n < seg_len; ++n) {
          mix[0][n] += g * rs.ref_channel[n];
          mix[1][n] += g * rs.struct_channel[n];
        }
        for (int a = 0; a < array_buf.channels(); ++a)
          for (size_t n = 0; n < seg_len; ++n)
            array_buf[a][n] += g * rs.array_channels[a][n];
        if (placed_meta[i].is_target)
          for (size_t n = 0; n < seg_len; ++n) target[0][n] += rs.ref_channel[n];
      }

      const std::string wav_rel = "wav/" + rec.id + "_mix.wav";
      const std::string tgt_rel = "wav/" + rec.id + "_target.wav";
      wav_write(mix, (fs::path(out_dir) / wav_rel).string());
      wav_write(target, (fs::path(out_dir) / tgt_rel).string());
      rec.mixture_wav_path = wav_rel;
      rec.target_wav_path = tgt_rel;
      if (config.render_array) {
        const std::string arr_rel = "wav/" + rec.id + "_array.wav";
        wav_write(array_buf, (fs::path(out_dir) / arr_rel).string());
        rec.array_wav_path = arr_rel;
      }
      manifest.records.push_back(std::move(rec));
    }
  }

  manifest.validate();
  return manifest;
}

void save_manifest(const MixtureManifest& manifest, const std::string& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) fail(ErrorKind::Io, "cannot write " + path);
  json meta = {{"type", "meta"},
               {"seed", manifest.seed},
               {"prng_algorithm", manifest.prng_algorithm},
               {"noise_head_s", manifest.noise_head_s}};
  f << meta.dump() << '\n';
  for (const auto& r : manifest.records) {
    json j = {{"id", r.id},
              {"mixture_wav_path", r.mixture_wav_path},
              {"target_wav_path", r.target_wav_path},
              {"n_sectors", r.n_sectors},
              {"selected_sectors", r.selected_sectors},
              {"room_id", r.room_id},
              {"rig_id", r.rig_id},
              {"seed", r.seed}};
    if (r.array_wav_path) j["array_wav_path"] = *r.array_wav_path;
    json sources = json::array();
    for (const auto& s : r.per_source)
      sources.push_back({{"angle_deg", s.angle_deg},
                         {"sector", s.sector},
                         {"snr_db", s.snr_db},
                         {"signal_id", s.signal_id}});
    j["per_source"] = sources;
    f << j.dump() << '\n';
  }
}

MixtureManifest load_manifest(const std::string& path) {
  std::ifstream f(path);
  if (!f) fail(ErrorKind::Io, "cannot open " + path);
  MixtureManifest manifest;
  manifest.base_dir = fs::path(path).parent_path().string();
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) fail(ErrorKind::Format, "bad manifest line in " + path);
    if (j.value("type", "") == "meta") {
      manifest.seed = j.value("seed", 0ULL);
      manifest.prng_algorithm = j.value("prng_algorithm", "");
      manifest.noise_head_s = j.value("noise_head_s", 0.0);
      continue;
    }
    MixtureRecord r;
    r.id = j.at("id").get<std::string>();
    r.mixture_wav_path = j.at("mixture_wav_path").get<std::string>();
    r.target_wav_path = j.at("target_wav_path").get<std::string>();
    if (j.contains("array_wav_path"))
      r.array_wav_path = j["array_wav_path"].get<std::string>();
    r.n_sectors = j.at("n_sectors").get<int>();
    r.selected_sectors = j.at("selected_sectors").get<uint32_t>();
    r.room_id = j.value("room_id", "");
    r.rig_id = j.value("rig_id", "");
    r.seed = j.value("seed", 0ULL);
    for (const auto& s : j.at("per_source")) {
      r.per_source.push_back({s.at("angle_deg").get<double>(),
                              s.at("sector").get<int>(),
                              s.at("snr_db").get<double>(),
                              s.at("signal_id").get<std::string>()});
    }
    manifest.records.push_back(std::move(r));
  }
  return manifest;
}

std::string resolve_path(const MixtureManifest& manifest, const std::string& rel) {
  if (rel.empty()) return rel;
  if (fs::path(rel).is_absolute()) return rel;
  return (fs::path(manifest.base_dir) / rel).string();
}

MicSeparationResult mic_separation_experiment(const std::vector<double>& distances_m,
                                              const std::vector<RoomSpec>& rooms,
                                              int n_placements_per_room,
                                              uint64_t seed) {
  if (rooms.size() < 2) fail(ErrorKind::Argument, "need >= 2 rooms");
  if (n_placements_per_room < 1) fail(ErrorKind::Argument, "need >= 1 placement");

  const FrameSpec frame = FrameSpec::hann();
  const int bins = frame.bins();
  const size_t sig_len = kSampleRate;  // 1 s excitation

  // One fixed broadband excitation shared by every placement.
  std::vector<double> excitation(sig_len);
  {
    Rng rng(hash_seed(seed, 0xE0));
    for (auto& v : excitation) v = rng.uniform(-1.0, 1.0);
    peak_normalize(excitation, 0.5);
  }

  MicSeparationResult result;
  result.distances_m = distances_m;
  result.freqs_hz.resize(bins);
  for (int f = 0; f < bins; ++f)
    result.freqs_hz[f] = static_cast<double>(f) * kSampleRate / frame.window_len;

  // ratio_db[distance][placement][bin]
  std::vector<std::vector<std::vector<double>>> ratio_db(
      distances_m.size());

  size_t placement_index = 0;
  for (size_t r = 0; r < rooms.size(); ++r) {
    const RoomSpec& room = rooms[r];
    for (int p = 0; p < n_placements_per_room; ++p, ++placement_index) {
      Rng rng(hash_seed(seed, placement_index + 1));
      const Vec3 center = {room.dims[0] * rng.uniform(0.25, 0.75),
                           room.dims[1] * rng.uniform(0.25, 0.75),
                           std::min(room.dims[2] - 0.5, rng.uniform(0.9, 1.4))};
      const double axis_deg = rng.uniform(0.0, 360.0);
      const Vec3 axis = {std::cos(axis_deg * M_PI / 180.0),
                         std::sin(axis_deg * M_PI / 180.0), 0.0};
      Vec3 src;
      do {
        src = {room.dims[0] * rng.uniform(0.15, 0.85),
               room.dims[1] * rng.uniform(0.15, 0.85),
               std::min(room.dims[2] - 0.5, rng.uniform(0.9, 1.6))};
      } while (std::hypot(src[0] - center[0], src[1] - center[1]) < 1.0);

      for (size_t di = 0; di < distances_m.size(); ++di) {
        const double half = distances_m[di] / 2.0;
        const Vec3 m_ref = {center[0] - axis[0] * half, center[1] - axis[1] * half,
                            center[2]};
        const Vec3 m_in = {center[0] + axis[0] * half, center[1] + axis[1] * half,
                           center[2]};
        auto rir_ref = render_rir(room, src, m_ref, room.max_order);
        auto rir_in = render_rir(room, src, m_in, room.max_order);
        auto x_ref = convolve(excitation, rir_ref);
        auto x_in = convolve(excitation, rir_in);
        x_ref.resize(sig_len);
        x_in.resize(sig_len);
        const auto ratio = signal_ratio(x_in, x_ref, frame);
        std::vector<double> db(bins);
        for (int f = 0; f < bins; ++f)
          db[f] = 20.0 * std::log10(std::max(std::abs(ratio[f]), 1e-12));
        ratio_db[di].push_back(std::move(db));
      }
    }
  }

  result.std_db.assign(distances_m.size(), std::vector<double>(bins, 0.0));
  result.mean_std_1_8k_db.assign(distances_m.size(), 0.0);
  for (size_t di = 0; di < distances_m.size(); ++di) {
    const auto& rows = ratio_db[di];
    const double n = static_cast<double>(rows.size());
    for (int f = 0; f < bins; ++f) {
      double mean = 0.0;
      for (const auto& row : rows) mean += row[f];
      mean /= n;
      double acc = 0.0;
      for (const auto& row : rows) acc += (row[f] - mean) * (row[f] - mean);
      result.std_db[di][f] = std::sqrt(acc / n);
    }
    double band_acc = 0.0;
    int band_n = 0;
    for (int f = 0; f < bins; ++f) {
      if (result.freqs_hz[f] >= 1000.0 && result.freqs_hz[f] <= 8000.0) {
        band_acc += result.std_db[di][f];
        ++band_n;
      }
    }
    result.mean_std_1_8k_db[di] = band_acc / std::max(1, band_n);
  }
  return result;
}

}  // namespace dsx

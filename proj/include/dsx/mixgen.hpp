#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dsx/common.hpp"
#include "dsx/corpus.hpp"
#include "dsx/microstructure.hpp"
#include "dsx/scene.hpp"

namespace dsx {

struct PerSourceInfo {
  double angle_deg = 0.0;  // device frame, [0, 180)
  int sector = 0;
  double snr_db = 0.0;  // targets are the 0 dB reference
  std::string signal_id;
};

struct MixtureRecord {
  std::string id;
  std::string mixture_wav_path;             // 2-ch: [reference, structure]
  std::optional<std::string> array_wav_path;  // N-ch, plain mics
  std::string target_wav_path;              // 1-ch ground truth at reference mic
  int n_sectors = 6;
  uint32_t selected_sectors = 0;  // bit i-1 set => sector i selected
  std::vector<PerSourceInfo> per_source;
  std::string room_id;
  std::string rig_id;
  uint64_t seed = 0;

  bool target_present() const {
    for (const auto& s : per_source)
      if (selected_sectors & (1u << (s.sector - 1))) return true;
    return false;
  }
};

struct MixtureManifest {
  std::string base_dir;  // directory that paths are relative to
  uint64_t seed = 0;
  std::string prng_algorithm;
  double noise_head_s = 0.0;  // leading interferer-only segment per mixture
  std::vector<MixtureRecord> records;

  void validate() const;  // sector/selection invariants on every record
};

struct GenConfig {
  int n_sectors = 6;
  int max_targets = 3;
  int clips_per_combo = 1;
  // Optional per-popcount override of clips_per_combo (index 0 -> k=1).
  std::vector<int> clips_per_combo_by_k;
  double snr_lo_db = -5.0;
  double snr_hi_db = 5.0;
  double duration_s = 3.0;
  // Leading segment guaranteed interferer-only (targets start after it);
  // used by beamformer noise-covariance estimation and excluded from metrics.
  double noise_head_s = 0.5;
  double dist_lo_m = 0.5;
  double dist_hi_m = 2.5;
  double empty_target_rate = 0.0;  // fraction of records with no target source
  int interferers_lo = 1;
  int interferers_hi = 2;
  bool render_array = false;
  int array_mics = 4;
  double array_radius_m = 0.05;
  int rigs_per_room = 1;
  double mic_separation_m = 0.01;
};

MixtureManifest generate_mixtures(const std::vector<CorpusClip>& corpus,
                                  const std::vector<RoomSpec>& rooms,
                                  const GenConfig& config,
                                  const DirectionFilterBank& bank,
                                  const std::string& out_dir, uint64_t seed);

void save_manifest(const MixtureManifest& manifest, const std::string& path);
MixtureManifest load_manifest(const std::string& path);

std::string resolve_path(const MixtureManifest& manifest, const std::string& rel);

// Sector combination enumeration (ascending popcount, then lexicographic).
std::vector<uint32_t> sector_combinations(int n_sectors, int max_targets);

struct MicSeparationResult {
  std::vector<double> distances_m;
  std::vector<double> freqs_hz;                 // one per STFT bin
  std::vector<std::vector<double>> std_db;      // [distance][bin]
  std::vector<double> mean_std_1_8k_db;         // [distance]
};

// Renders paired plain-mic recordings over random placements and reports the
// per-frequency spread of the inter-mic magnitude ratio, per separation.
MicSeparationResult mic_separation_experiment(const std::vector<double>& distances_m,
                                              const std::vector<RoomSpec>& rooms,
                                              int n_placements_per_room,
                                              uint64_t seed);

}  // namespace dsx

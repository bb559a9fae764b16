#pragma once

#include <string>

#include "dsx/net.hpp"

namespace dsx {

// "SSDX" container: version, config JSON blob, per-frequency feature stats,
// named little-endian f32 tensors in lexicographic order, metadata JSON blob.
// save(load(x)) is byte-identical.
inline constexpr uint32_t kCheckpointVersion = 1;

struct TrainMeta {
  uint64_t seed = 0;
  int epochs = 0;
  std::vector<double> epoch_losses;  // mean training loss per epoch
  double final_loss = 0.0;
};

void save_checkpoint(const Model& model, const TrainMeta& meta,
                     const std::string& path);

struct LoadedCheckpoint {
  Model model;
  TrainMeta meta;
};

LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace dsx

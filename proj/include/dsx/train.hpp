#pragma once

#include <string>

#include "dsx/checkpoint.hpp"
#include "dsx/mixgen.hpp"
#include "dsx/net.hpp"

namespace dsx {

struct TrainConfig {
  NetConfig net;
  int epochs = 40;
  int batch_size = 4;
  double lambda = 50.0;
  // Learning-rate schedule anchors: linear warmup from lr_start to lr_peak
  // over warmup_epochs, constant for plateau_epochs, then *decay every
  // decay_every epochs.
  double lr_start = 5e-4;
  double lr_peak = 5e-3;
  int warmup_epochs = 10;
  int plateau_epochs = 20;
  double decay = 0.95;
  int decay_every = 2;
  // Augmentation probabilities (applied independently per record per epoch).
  double time_shift_prob = 0.3;
  double time_shift_max_s = 0.25;
  double gain_prob = 0.3;
  double gain_max_db = 3.0;
};

double lr_at_epoch(const TrainConfig& config, int epoch);

// Trains on all manifest records (shuffled per epoch, batches of
// batch_size) and returns the final model; norm stats must already be
// fitted. Deterministic in (manifest, config, seed).
Model train(const MixtureManifest& manifest, const NormStats& stats,
            const TrainConfig& config, uint64_t seed, TrainMeta* meta_out = nullptr);

}  // namespace dsx

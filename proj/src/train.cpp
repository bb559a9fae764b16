#include "dsx/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>

namespace dsx {

double lr_at_epoch(const TrainConfig& config, int epoch) {
  if (epoch <= config.warmup_epochs) {
    const double t = static_cast<double>(epoch) / config.warmup_epochs;
    return config.lr_start + (config.lr_peak - config.lr_start) * t;
  }
  const int plateau_end = config.warmup_epochs + config.plateau_epochs;
  if (epoch <= plateau_end) return config.lr_peak;
  const int decays = (epoch - plateau_end) / config.decay_every;
  return config.lr_peak * std::pow(config.decay, static_cast<double>(decays));
}

namespace {

struct Example {
  AudioBuffer mixture;          // 2 ch
  std::vector<double> target;   // 1 ch
  bool target_present = false;
};

Example load_example(const MixtureManifest& manifest, const MixtureRecord& rec) {
  Example ex;
  ex.mixture = wav_read(resolve_path(manifest, rec.mixture_wav_path));
  AudioBuffer tgt = wav_read(resolve_path(manifest, rec.target_wav_path));
  if (ex.mixture.channels() != 2 || tgt.channels() != 1)
    fail(ErrorKind::Shape, "unexpected channel layout in record " + rec.id);
  ex.target = tgt[0];
  ex.target_present = rec.target_present();
  return ex;
}

void circular_shift(std::vector<double>& x, long by) {
  const long n = static_cast<long>(x.size());
  if (n == 0) return;
  by = ((by % n) + n) % n;
  if (by == 0) return;
  std::rotate(x.begin(), x.begin() + (n - by), x.end());
}

void augment(Example& ex, const TrainConfig& config, Rng& rng) {
  if (rng.uniform() < config.time_shift_prob) {
    const double max_shift = config.time_shift_max_s * kSampleRate;
    const long by = static_cast<long>(std::lround(rng.uniform(-max_shift, max_shift)));
    circular_shift(ex.mixture[0], by);
    circular_shift(ex.mixture[1], by);
    circular_shift(ex.target, by);
  }
  if (rng.uniform() < config.gain_prob) {
    const double g =
        std::pow(10.0, rng.uniform(-config.gain_max_db, config.gain_max_db) / 20.0);
    for (auto& v : ex.mixture[0]) v *= g;
    for (auto& v : ex.mixture[1]) v *= g;
    for (auto& v : ex.target) v *= g;
  }
}

}  // namespace

Model train(const MixtureManifest& manifest, const NormStats& stats,
            const TrainConfig& config, uint64_t seed, TrainMeta* meta_out) {
  if (manifest.records.empty()) fail(ErrorKind::Resource, "empty manifest");
  config.net.validate();

  Model model = Model::init(config.net, stats, seed);
  AdamState adam;
  const FrameSpec frame = config.net.frame();

  const size_t n_records = manifest.records.size();
  std::vector<size_t> order(n_records);
  std::iota(order.begin(), order.end(), 0);

  TrainMeta meta;
  meta.seed = seed;
  meta.epochs = config.epochs;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    Rng shuffle_rng(hash_seed(seed, 0xE000000ULL + epoch));
    for (size_t i = n_records; i > 1; --i)
      std::swap(order[i - 1], order[shuffle_rng.uniform_index(i)]);

    AdamConfig adam_cfg;
    adam_cfg.lr = lr_at_epoch(config, epoch);

    double epoch_loss = 0.0;
    size_t batches = 0;

    for (size_t start = 0; start < n_records; start += config.batch_size) {
      const size_t bsz = std::min<size_t>(config.batch_size, n_records - start);

      // Load and augment the batch.
      std::vector<Example> examples;
      examples.reserve(bsz);
      for (size_t k = 0; k < bsz; ++k) {
        const auto& rec = manifest.records[order[start + k]];
        Example ex = load_example(manifest, rec);
        Rng aug_rng(hash_seed(rec.seed, 0xA000000ULL + epoch));
        augment(ex, config, aug_rng);
        examples.push_back(std::move(ex));
      }
      const size_t len = examples[0].mixture.length();
      for (const auto& ex : examples)
        if (ex.mixture.length() != len || ex.target.size() != len)
          fail(ErrorKind::Shape, "training records must share one duration");

      // Features per record, stacked on the batch axis.
      std::vector<Tensor> feats, targets;
      std::vector<AngleQuery> queries;
      for (size_t k = 0; k < bsz; ++k) {
        const Spectrogram spec = stft(examples[k].mixture, frame);
        feats.push_back(model.assemble_features(spec));
        targets.push_back(Tensor::from(examples[k].target,
                                       {1, static_cast<long>(len)}));
        const auto& rec = manifest.records[order[start + k]];
        queries.push_back({rec.n_sectors, rec.selected_sectors});
      }

      Tape tape;
      Tensor loss_total = Tensor::scalar(0.0);
      for (size_t k = 0; k < bsz; ++k) {
        Tensor embedding = model.angle_embedding(queries[k]);
        BlockStates states = BlockStates::zeros(
            config.net.n_blocks, 1, config.net.model_bins(),
            config.net.causal_lstm_hidden);
        Tensor spectrum = model.forward_spectrum(feats[k], embedding, states);
        Tensor est = wola_synthesis(spectrum, frame, len);
        Tensor loss_k =
            si_sdr_loss(est, targets[k], examples[k].target_present, config.lambda);
        loss_total = add(loss_total, loss_k);
      }
      Tensor loss = scale(loss_total, 1.0 / static_cast<double>(bsz));
      const double loss_value = loss.item();

      zero_grads(model.params);
      tape.backward(loss);
      adam_step(model.params, adam, adam_cfg);

      epoch_loss += loss_value;
      ++batches;
    }
    meta.epoch_losses.push_back(epoch_loss / std::max<size_t>(1, batches));
  }
  meta.final_loss = meta.epoch_losses.empty() ? 0.0 : meta.epoch_losses.back();
  if (meta_out) *meta_out = meta;
  return model;
}

}  // namespace dsx

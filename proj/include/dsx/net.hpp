#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "dsx/audio.hpp"
#include "dsx/features.hpp"
#include "dsx/nn.hpp"
#include "dsx/stft.hpp"
#include "dsx/tensor.hpp"

namespace dsx {

struct NetConfig {
  int n_sectors = 6;
  int chunk_samples = 192;     // T, one hop of new audio per step
  int lookahead_samples = 96;  // sigma, equals the frame padding
  int window_len = 288;
  int hop = 192;
  int embed_channels = 16;  // c
  int n_blocks = 2;         // N
  int freq_downsample = 4;  // encoder stride over frequency
  int blstm_hidden = 32;
  int causal_lstm_hidden = 32;

  int bins() const { return window_len / 2 + 1; }
  int padded_bins() const {
    const int s = freq_downsample;
    return ((bins() + s - 1) / s) * s;
  }
  int model_bins() const { return padded_bins() / freq_downsample; }  // F'

  void validate() const;
  FrameSpec frame() const { return FrameSpec::hann(window_len, hop); }
};

struct AngleQuery {
  int n_sectors = 6;
  uint32_t selected = 0;  // bit i-1 => sector i

  void validate() const;
};

// Selected sectors get 1, sectors adjacent to a selected one get 0.25 (max
// wins on overlap, no wraparound across the semicircle), everything else 0.
std::vector<double> raw_angle_vector(const AngleQuery& query);

// Carried causal state: one (h, c) pair per separation block, each (B, F', H).
struct BlockStates {
  std::vector<Tensor> h;
  std::vector<Tensor> c;

  static BlockStates zeros(int n_blocks, long batch, long model_bins, long hidden);
};

struct Model {
  NetConfig config;
  NormStats stats;
  std::map<std::string, Tensor> params;

  static Model init(const NetConfig& config, const NormStats& stats,
                    uint64_t seed);

  const Tensor& p(const std::string& name) const;

  // Conditioning embedding E: (F', c).
  Tensor angle_embedding(const AngleQuery& query) const;

  // Trunk: features (B, T, padded_bins, 7) -> one-sided spectrum
  // (B, T, bins, 2). `states` carries the causal LSTM state across calls.
  Tensor forward_spectrum(const Tensor& features, const Tensor& embedding,
                          BlockStates& states) const;

  // Feature assembly for a spectrogram pair (2 channels required).
  Tensor assemble_features(const Spectrogram& spec) const;
};

// Offline inference: output length equals input length.
AudioBuffer forward_offline(const AudioBuffer& two_channel, const AngleQuery& query,
                            const Model& model);

// Streaming state machine. Feed exactly chunk_samples per channel per step;
// each step returns chunk_samples of output delayed by lookahead_samples.
struct StreamState {
  AngleQuery query;
  int n_blocks = 0;
  std::vector<std::vector<double>> pending;  // [2][lookahead] carried input
  BlockStates states;
  std::vector<double> ola_tail;  // [lookahead]
  Tensor embedding;              // cached E
  long frames_emitted = 0;

  static StreamState start(const AngleQuery& query, const Model& model);
};

std::vector<double> stream_step(const std::vector<double>& ref_chunk,
                                const std::vector<double>& struct_chunk,
                                const AngleQuery& query, StreamState& state,
                                const Model& model);

// Training objective. When the query's area holds no speaker the target is
// the zero signal and the loss is lambda * mean|est - target|; otherwise the
// negated scale-invariant ratio with the log argument clamped to keep the
// loss inside [-100, 100].
Tensor si_sdr_loss(const Tensor& est, const Tensor& target, bool target_present,
                   double lambda = 50.0);

}  // namespace dsx

#pragma once

#include <functional>
#include <map>
#include <string>

#include "dsx/rng.hpp"
#include "dsx/stft.hpp"
#include "dsx/tensor.hpp"

namespace dsx {

// Gate order throughout: input, forget, cell, output.
struct LstmWeights {
  Tensor wx;  // (I, 4H)
  Tensor wh;  // (H, 4H)
  Tensor b;   // (4H)

  long hidden() const { return wh.dim(0); }
  long input() const { return wx.dim(0); }
};

// One step, composed from tensor primitives (gradients follow from the op
// set). x: (N, I); h_prev, c_prev: (N, H).
std::pair<Tensor, Tensor> lstm_cell(const Tensor& x, const Tensor& h_prev,
                                    const Tensor& c_prev, const LstmWeights& w);

// Causal run along the time axis of a (B, T, F, C) tensor; every (b, f)
// position carries its own recurrent state. Fused forward/backward that
// re-computes gate pre-activations in the backward sweep instead of storing
// them. Optional initial state (B, F, H) supports streaming; final state is
// written to *h_last / *c_last when provided (values only, no gradient).
Tensor lstm_time(const Tensor& x, const LstmWeights& w,
                 const Tensor* h0 = nullptr, const Tensor* c0 = nullptr,
                 Tensor* h_last = nullptr, Tensor* c_last = nullptr);

// Bidirectional run along the frequency axis of a (B, T, F, C) tensor,
// output (B, T, F, 2H) = [forward ; backward]. Frequency is complete within
// each frame, so this is causal in time by construction.
Tensor lstm_freq_bidir(const Tensor& x, const LstmWeights& fwd,
                       const LstmWeights& bwd);

// Weighted overlap-add synthesis as a differentiable op.
// y: (B, T, F, 2) one-sided complex spectrum (re, im) -> (B, out_len).
Tensor wola_synthesis(const Tensor& y, const FrameSpec& frame, size_t out_len);

// ---------------------------------------------------------------------------

struct AdamState {
  std::map<std::string, std::vector<double>> m;
  std::map<std::string, std::vector<double>> v;
  long step = 0;
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Standard bias-corrected update over a named parameter set. Parameters are
// visited in lexicographic name order; gradients are read from each tensor's
// node and left untouched (caller zeroes them per step).
void adam_step(std::map<std::string, Tensor>& params, AdamState& state,
               const AdamConfig& config);

void zero_grads(std::map<std::string, Tensor>& params);

// Central-difference verification. f must build its graph from `inputs`
// inside the active tape (it is called many times). Returns the maximum
// relative error over all input elements, with the spec's error metric
// |a - n| / max(1e-8, |a| + |n|).
double grad_check(const std::function<Tensor(std::vector<Tensor>&)>& f,
                  std::vector<Tensor>& inputs, double eps = 1e-5);

// Uniform(-limit, limit) with limit = 1/sqrt(fan_in).
Tensor init_uniform(std::vector<long> shape, long fan_in, Rng& rng);
LstmWeights init_lstm(long input, long hidden, Rng& rng);

}  // namespace dsx

#pragma once

#include <complex>
#include <vector>

#include "dsx/audio.hpp"
#include "dsx/common.hpp"

namespace dsx {

// Analysis/synthesis framing. The synthesis window is the canonical dual
// w_s[n] = w_a[n] / sum_k w_a[n - k*hop]^2, which reconstructs exactly for
// any hop < window_len with an everywhere-positive denominator — including
// the (288, 192) geometry used throughout, where plain Hann overlap-add
// does not sum to one.
struct FrameSpec {
  int window_len = 288;
  int hop = 192;
  int pad = 96;  // zero padding applied at both signal ends; == window_len - hop
  std::vector<double> analysis_window;
  std::vector<double> synthesis_window;

  static FrameSpec hann(int window_len = 288, int hop = 192);
  static FrameSpec with_window(std::vector<double> analysis, int hop);

  int bins() const { return window_len / 2 + 1; }
};

struct Spectrogram {
  int bins = 0;
  int frames = 0;
  // [channel][t * bins + f]
  std::vector<std::vector<std::complex<double>>> data;

  int channels() const { return static_cast<int>(data.size()); }
  std::complex<double>& at(int c, int f, int t) { return data[c][static_cast<size_t>(t) * bins + f]; }
  const std::complex<double>& at(int c, int f, int t) const {
    return data[c][static_cast<size_t>(t) * bins + f];
  }
};

// Frame t covers padded samples [t*hop, t*hop + window_len); the signal is
// zero-padded by `pad` samples at both ends. One-sided spectrum, F = N/2+1.
Spectrogram stft(const AudioBuffer& buffer, const FrameSpec& spec);

// Weighted overlap-add inverse. Exact on interior samples (one window length
// away from each end) when fed stft() output of the same spec.
AudioBuffer istft(const Spectrogram& spec_gram, const FrameSpec& spec,
                  size_t out_len);

int stft_frame_count(size_t signal_len, const FrameSpec& spec);

// Single-frame helpers shared by the batch and streaming paths.
void dft_frame(const double* windowed, int n, std::complex<double>* out_bins);
void idft_frame(const std::complex<double>* bins, int n, double* out_samples);
// Adjoint of idft_frame: maps a gradient over the n output samples to a
// gradient over the one-sided bins.
void idft_frame_adjoint(const double* sample_grad, int n,
                        std::complex<double>* bin_grad);

}  // namespace dsx

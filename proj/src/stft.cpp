#include "dsx/stft.hpp"

#include <cmath>
#include <memory>

#include "dsx/dsp.hpp"

namespace dsx {

namespace {

// Per-size cos/sin tables for the one-sided DFT of a real frame.
struct DftTables {
  int n = 0;
  int bins = 0;
  std::vector<double> cos_t;  // [f * n + i]
  std::vector<double> sin_t;

  explicit DftTables(int size) : n(size), bins(size / 2 + 1) {
    cos_t.resize(static_cast<size_t>(bins) * n);
    sin_t.resize(static_cast<size_t>(bins) * n);
    for (int f = 0; f < bins; ++f) {
      for (int i = 0; i < n; ++i) {
        const double ang = 2.0 * M_PI * f * i / static_cast<double>(n);
        cos_t[static_cast<size_t>(f) * n + i] = std::cos(ang);
        sin_t[static_cast<size_t>(f) * n + i] = std::sin(ang);
      }
    }
  }
};

const DftTables& tables_for(int n) {
  static thread_local std::vector<std::unique_ptr<DftTables>> cache;
  for (auto& t : cache)
    if (t->n == n) return *t;
  cache.emplace_back(std::make_unique<DftTables>(n));
  return *cache.back();
}

}  // namespace

void dft_frame(const double* windowed, int n, std::complex<double>* out_bins) {
  const DftTables& tb = tables_for(n);
  for (int f = 0; f < tb.bins; ++f) {
    const double* c = &tb.cos_t[static_cast<size_t>(f) * n];
    const double* s = &tb.sin_t[static_cast<size_t>(f) * n];
    double re = 0.0, im = 0.0;
    for (int i = 0; i < n; ++i) {
      re += windowed[i] * c[i];
      im -= windowed[i] * s[i];
    }
    out_bins[f] = {re, im};
  }
}

void idft_frame(const std::complex<double>* bins, int n, double* out_samples) {
  const DftTables& tb = tables_for(n);
  const int half = n / 2;
  for (int i = 0; i < n; ++i) out_samples[i] = bins[0].real();
  for (int f = 1; f < tb.bins; ++f) {
    const double* c = &tb.cos_t[static_cast<size_t>(f) * n];
    const double* s = &tb.sin_t[static_cast<size_t>(f) * n];
    const double re = bins[f].real(), im = bins[f].imag();
    const double w = (f == half) ? 1.0 : 2.0;
    for (int i = 0; i < n; ++i) out_samples[i] += w * (re * c[i] - im * s[i]);
  }
  const double inv = 1.0 / static_cast<double>(n);
  for (int i = 0; i < n; ++i) out_samples[i] *= inv;
}

void idft_frame_adjoint(const double* sample_grad, int n,
                        std::complex<double>* bin_grad) {
  const DftTables& tb = tables_for(n);
  const int half = n / 2;
  const double inv = 1.0 / static_cast<double>(n);
  for (int f = 0; f < tb.bins; ++f) {
    const double* c = &tb.cos_t[static_cast<size_t>(f) * n];
    const double* s = &tb.sin_t[static_cast<size_t>(f) * n];
    const double w = (f == 0 || f == half) ? 1.0 : 2.0;
    double dre = 0.0, dim = 0.0;
    for (int i = 0; i < n; ++i) {
      dre += sample_grad[i] * c[i];
      dim -= sample_grad[i] * s[i];
    }
    bin_grad[f] = {w * inv * dre, w * inv * dim};
  }
}

FrameSpec FrameSpec::with_window(std::vector<double> analysis, int hop) {
  FrameSpec fs;
  fs.window_len = static_cast<int>(analysis.size());
  fs.hop = hop;
  if (hop > fs.window_len || hop <= 0)
    fail(ErrorKind::Argument, "FrameSpec: need 0 < hop <= window_len");
  fs.pad = fs.window_len - hop;
  fs.analysis_window = std::move(analysis);

  // Canonical dual: w_s = w_a / sum_k w_a[n - k*hop]^2. The denominator is
  // periodic in hop over interior alignments.
  std::vector<double> denom(fs.window_len, 0.0);
  for (int n = 0; n < fs.window_len; ++n) {
    const int m = n % hop;
    for (int j = m; j < fs.window_len; j += hop)
      denom[n] += fs.analysis_window[j] * fs.analysis_window[j];
  }
  fs.synthesis_window.resize(fs.window_len);
  for (int n = 0; n < fs.window_len; ++n) {
    if (denom[n] <= 0.0)
      fail(ErrorKind::Argument, "FrameSpec: WOLA denominator vanishes");
    fs.synthesis_window[n] = fs.analysis_window[n] / denom[n];
  }
  return fs;
}

FrameSpec FrameSpec::hann(int window_len, int hop) {
  return with_window(hann_window(window_len), hop);
}

int stft_frame_count(size_t signal_len, const FrameSpec& spec) {
  const long padded = static_cast<long>(signal_len) + 2L * spec.pad;
  if (padded < spec.window_len) fail(ErrorKind::Size, "signal shorter than one frame");
  return static_cast<int>((padded - spec.window_len) / spec.hop) + 1;
}

Spectrogram stft(const AudioBuffer& buffer, const FrameSpec& spec) {
  const int frames = stft_frame_count(buffer.length(), spec);
  const int bins = spec.bins();
  const int n = spec.window_len;

  Spectrogram out;
  out.bins = bins;
  out.frames = frames;
  out.data.resize(buffer.channels());

  std::vector<double> frame(n);
  for (int c = 0; c < buffer.channels(); ++c) {
    out.data[c].resize(static_cast<size_t>(frames) * bins);
    const auto& x = buffer[c];
    const long len = static_cast<long>(x.size());
    for (int t = 0; t < frames; ++t) {
      const long start = static_cast<long>(t) * spec.hop - spec.pad;
      for (int i = 0; i < n; ++i) {
        const long idx = start + i;
        const double v = (idx >= 0 && idx < len) ? x[idx] : 0.0;
        frame[i] = v * spec.analysis_window[i];
      }
      dft_frame(frame.data(), n, &out.data[c][static_cast<size_t>(t) * bins]);
    }
  }
  return out;
}

AudioBuffer istft(const Spectrogram& spec_gram, const FrameSpec& spec,
                  size_t out_len) {
  if (spec_gram.bins != spec.bins())
    fail(ErrorKind::Shape, "istft: bin count does not match frame spec");
  const int n = spec.window_len;

  AudioBuffer out(spec_gram.channels(), out_len);
  std::vector<double> frame(n);
  for (int c = 0; c < spec_gram.channels(); ++c) {
    auto& y = out[c];
    for (int t = 0; t < spec_gram.frames; ++t) {
      idft_frame(&spec_gram.data[c][static_cast<size_t>(t) * spec_gram.bins], n,
                 frame.data());
      const long start = static_cast<long>(t) * spec.hop - spec.pad;
      for (int i = 0; i < n; ++i) {
        const long idx = start + i;
        if (idx >= 0 && idx < static_cast<long>(out_len))
          y[idx] += frame[i] * spec.synthesis_window[i];
      }
    }
  }
  return out;
}

}  // namespace dsx

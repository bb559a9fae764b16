#pragma once

#include <string>
#include <vector>

#include "dsx/common.hpp"

namespace dsx {

// Sampled waveform, one vector per channel, all channels equal length.
// Everything past ingestion runs at kSampleRate.
struct AudioBuffer {
  int rate = kSampleRate;
  std::vector<std::vector<double>> data;  // [channel][sample]

  AudioBuffer() = default;
  AudioBuffer(int channels, size_t length, int sample_rate = kSampleRate)
      : rate(sample_rate), data(channels, std::vector<double>(length, 0.0)) {}

  int channels() const { return static_cast<int>(data.size()); }
  size_t length() const { return data.empty() ? 0 : data[0].size(); }

  std::vector<double>& operator[](int c) { return data[c]; }
  const std::vector<double>& operator[](int c) const { return data[c]; }
};

enum class WavEncoding { Pcm16, Float32 };

// RIFF/WAVE reader. Accepts PCM 16-bit and IEEE float 32-bit at any rate;
// output is scaled to [-1, 1] and resampled to 24 kHz (64-tap Kaiser sinc).
AudioBuffer wav_read(const std::string& path);

void wav_write(const AudioBuffer& buffer, const std::string& path,
               WavEncoding encoding = WavEncoding::Float32);

// Windowed-sinc rate conversion; identity when rates already match.
std::vector<double> resample_sinc(const std::vector<double>& x, int rate_in,
                                  int rate_out);

double rms(const std::vector<double>& x);
void peak_normalize(std::vector<double>& x, double peak);

}  // namespace dsx

#include "dsx/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

namespace dsx {

namespace {

uint32_t read_u32(const uint8_t* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

uint16_t read_u16(const uint8_t* p) {
  return static_cast<uint16_t>(p[0] | (p[1] << 8));
}

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
  out.push_back(v & 0xff);
  out.push_back((v >> 8) & 0xff);
  out.push_back((v >> 16) & 0xff);
  out.push_back((v >> 24) & 0xff);
}

void put_u16(std::vector<uint8_t>& out, uint16_t v) {
  out.push_back(v & 0xff);
  out.push_back((v >> 8) & 0xff);
}

// Modified Bessel function of the first kind, order 0 (series expansion).
double bessel_i0(double x) {
  double sum = 1.0, term = 1.0;
  const double hx = x / 2.0;
  for (int k = 1; k < 64; ++k) {
    term *= (hx / k) * (hx / k);
    sum += term;
    if (term < 1e-18 * sum) break;
  }
  return sum;
}

double sinc(double x) {
  if (std::abs(x) < 1e-12) return 1.0;
  return std::sin(M_PI * x) / (M_PI * x);
}

}  // namespace

std::vector<double> resample_sinc(const std::vector<double>& x, int rate_in,
                                  int rate_out) {
  if (rate_in == rate_out) return x;
  if (rate_in <= 0 || rate_out <= 0) fail(ErrorKind::Argument, "bad sample rate");

  const double ratio = static_cast<double>(rate_out) / rate_in;
  const size_t out_len =
      static_cast<size_t>(std::llround(static_cast<double>(x.size()) * ratio));

  // 64-tap Kaiser(beta=8) windowed sinc, lowpassed to the narrower Nyquist.
  constexpr int kTaps = 64;
  constexpr double kBeta = 8.0;
  const double cutoff = std::min(1.0, ratio);  // relative to input Nyquist
  const double i0b = bessel_i0(kBeta);
  const int half = kTaps / 2;

  std::vector<double> y(out_len, 0.0);
  for (size_t n = 0; n < out_len; ++n) {
    const double t = static_cast<double>(n) / ratio;  // position in input
    const int base = static_cast<int>(std::floor(t));
    double acc = 0.0;
    for (int k = -half + 1; k <= half; ++k) {
      const int idx = base + k;
      if (idx < 0 || idx >= static_cast<int>(x.size())) continue;
      const double d = t - idx;  // |d| < half
      const double w_arg = d / half;
      const double win = bessel_i0(kBeta * std::sqrt(std::max(0.0, 1.0 - w_arg * w_arg))) / i0b;
      acc += x[idx] * cutoff * sinc(cutoff * d) * win;
    }
    y[n] = acc;
  }
  return y;
}

AudioBuffer wav_read(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(ErrorKind::Io, "cannot open " + path);
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                             std::istreambuf_iterator<char>());
  if (bytes.size() < 44 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    fail(ErrorKind::Format, "not a RIFF/WAVE file: " + path);

  uint16_t fmt_tag = 0, channels = 0, bits = 0;
  uint32_t rate = 0;
  bool have_fmt = false;
  size_t data_off = 0, data_len = 0;

  size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const char* id = reinterpret_cast<const char*>(bytes.data() + pos);
    const uint32_t sz = read_u32(bytes.data() + pos + 4);
    const size_t body = pos + 8;
    if (std::memcmp(id, "fmt ", 4) == 0) {
      if (body + 16 > bytes.size()) fail(ErrorKind::Format, "truncated fmt chunk");
      fmt_tag = read_u16(bytes.data() + body);
      channels = read_u16(bytes.data() + body + 2);
      rate = read_u32(bytes.data() + body + 4);
      bits = read_u16(bytes.data() + body + 14);
      have_fmt = true;
    } else if (std::memcmp(id, "data", 4) == 0) {
      data_off = body;
      data_len = sz;
    }
    pos = body + sz + (sz & 1);
  }

  if (!have_fmt || data_off == 0) fail(ErrorKind::Format, "missing fmt or data chunk");
  if (data_off + data_len > bytes.size()) fail(ErrorKind::Format, "truncated data chunk");
  if (channels == 0 || rate == 0) fail(ErrorKind::Format, "bad fmt fields");

  const bool pcm16 = (fmt_tag == 1 && bits == 16);
  const bool f32 = (fmt_tag == 3 && bits == 32);
  if (!pcm16 && !f32)
    fail(ErrorKind::Unsupported, "unsupported WAV encoding (want PCM16 or float32)");

  const size_t bytes_per = pcm16 ? 2 : 4;
  const size_t frames = data_len / (bytes_per * channels);

  AudioBuffer raw(channels, frames, static_cast<int>(rate));
  const uint8_t* d = bytes.data() + data_off;
  for (size_t n = 0; n < frames; ++n) {
    for (int c = 0; c < channels; ++c) {
      const uint8_t* p = d + (n * channels + c) * bytes_per;
      if (pcm16) {
        int16_t v = static_cast<int16_t>(p[0] | (p[1] << 8));
        raw[c][n] = static_cast<double>(v) / 32768.0;
      } else {
        uint32_t u = read_u32(p);
        float fv;
        std::memcpy(&fv, &u, 4);
        raw[c][n] = static_cast<double>(fv);
      }
    }
  }

  if (raw.rate == kSampleRate) return raw;
  AudioBuffer out(channels, 0, kSampleRate);
  for (int c = 0; c < channels; ++c)
    out.data[c] = resample_sinc(raw.data[c], raw.rate, kSampleRate);
  return out;
}

void wav_write(const AudioBuffer& buffer, const std::string& path,
               WavEncoding encoding) {
  const int channels = buffer.channels();
  const size_t frames = buffer.length();
  const bool pcm16 = (encoding == WavEncoding::Pcm16);
  const uint16_t bytes_per = pcm16 ? 2 : 4;
  const uint32_t data_len = static_cast<uint32_t>(frames * channels * bytes_per);

  std::vector<uint8_t> out;
  out.reserve(44 + data_len);
  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  put_u32(out, 36 + data_len);
  out.insert(out.end(), {'W', 'A', 'V', 'E'});
  out.insert(out.end(), {'f', 'm', 't', ' '});
  put_u32(out, 16);
  put_u16(out, pcm16 ? 1 : 3);
  put_u16(out, static_cast<uint16_t>(channels));
  put_u32(out, static_cast<uint32_t>(buffer.rate));
  put_u32(out, static_cast<uint32_t>(buffer.rate) * channels * bytes_per);
  put_u16(out, static_cast<uint16_t>(channels * bytes_per));
  put_u16(out, pcm16 ? 16 : 32);
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  put_u32(out, data_len);

  for (size_t n = 0; n < frames; ++n) {
    for (int c = 0; c < channels; ++c) {
      const double v = buffer[c][n];
      if (pcm16) {
        long q = std::lround(v * 32768.0);
        q = std::clamp(q, -32768L, 32767L);
        put_u16(out, static_cast<uint16_t>(static_cast<int16_t>(q)));
      } else {
        float fv = static_cast<float>(v);
        uint32_t u;
        std::memcpy(&u, &fv, 4);
        put_u32(out, u);
      }
    }
  }

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) fail(ErrorKind::Io, "cannot open for write: " + path);
  f.write(reinterpret_cast<const char*>(out.data()),
          static_cast<std::streamsize>(out.size()));
  if (!f) fail(ErrorKind::Io, "write failed: " + path);
}

double rms(const std::vector<double>& x) {
  if (x.empty()) return 0.0;
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return std::sqrt(acc / static_cast<double>(x.size()));
}

void peak_normalize(std::vector<double>& x, double peak) {
  double m = 0.0;
  for (double v : x) m = std::max(m, std::abs(v));
  if (m <= 0.0) return;
  const double g = peak / m;
  for (double& v : x) v *= g;
}

}  // namespace dsx

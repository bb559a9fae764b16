#include "dsx/dsp.hpp"

#include <algorithm>
#include <cmath>

#include "dsx/audio.hpp"

namespace dsx {

void fft(std::vector<cplx>& a, bool inverse) {
  const size_t n = a.size();
  if (n == 0 || (n & (n - 1)) != 0)
    fail(ErrorKind::Argument, "fft size must be a power of two");

  for (size_t i = 1, j = 0; i < n; ++i) {
    size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }

  for (size_t len = 2; len <= n; len <<= 1) {
    const double ang = 2.0 * M_PI / static_cast<double>(len) * (inverse ? 1.0 : -1.0);
    const cplx wn(std::cos(ang), std::sin(ang));
    for (size_t i = 0; i < n; i += len) {
      cplx w(1.0, 0.0);
      for (size_t k = 0; k < len / 2; ++k) {
        const cplx u = a[i + k];
        const cplx v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wn;
      }
    }
  }
  if (inverse) {
    const double inv = 1.0 / static_cast<double>(n);
    for (auto& v : a) v *= inv;
  }
}

size_t next_pow2(size_t n) {
  size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

std::vector<double> convolve_direct(const std::vector<double>& x,
                                    const std::vector<double>& h) {
  if (x.empty() || h.empty()) fail(ErrorKind::Size, "convolve: empty input");
  std::vector<double> y(x.size() + h.size() - 1, 0.0);
  for (size_t i = 0; i < x.size(); ++i) {
    const double xi = x[i];
    for (size_t j = 0; j < h.size(); ++j) y[i + j] += xi * h[j];
  }
  return y;
}

std::vector<double> convolve(const std::vector<double>& x,
                             const std::vector<double>& h) {
  if (x.empty() || h.empty()) fail(ErrorKind::Size, "convolve: empty input");
  const size_t out_len = x.size() + h.size() - 1;
  // Direct form wins for short kernels.
  if (std::min(x.size(), h.size()) <= 64) return convolve_direct(x, h);

  const size_t n = next_pow2(out_len);
  std::vector<cplx> fx(n, cplx(0, 0)), fh(n, cplx(0, 0));
  for (size_t i = 0; i < x.size(); ++i) fx[i] = cplx(x[i], 0);
  for (size_t i = 0; i < h.size(); ++i) fh[i] = cplx(h[i], 0);
  fft(fx, false);
  fft(fh, false);
  for (size_t i = 0; i < n; ++i) fx[i] *= fh[i];
  fft(fx, true);
  std::vector<double> y(out_len);
  for (size_t i = 0; i < out_len; ++i) y[i] = fx[i].real();
  return y;
}

namespace {
double sinc(double x) {
  if (std::abs(x) < 1e-12) return 1.0;
  return std::sin(M_PI * x) / (M_PI * x);
}
}  // namespace

std::vector<double> frac_delay_kernel(double mu) {
  constexpr int kHalf = 15;  // 31 taps
  std::vector<double> h(2 * kHalf + 1);
  for (int k = -kHalf; k <= kHalf; ++k) {
    const double t = static_cast<double>(k) - mu;
    const double win = 0.5 * (1.0 + std::cos(M_PI * t / (kHalf + 1)));
    h[k + kHalf] = sinc(t) * win;
  }
  return h;
}

std::vector<double> fractional_delay(const std::vector<double>& x,
                                     double delay_samples) {
  if (delay_samples < 0.0) fail(ErrorKind::Argument, "negative delay");
  constexpr int kHalf = 15;
  const long m = static_cast<long>(std::floor(delay_samples));
  const double mu = delay_samples - static_cast<double>(m);

  const size_t out_len = x.size() + static_cast<size_t>(m) + kHalf +
                         (mu > 0.0 ? 1 : 0);
  std::vector<double> y(out_len, 0.0);
  if (mu == 0.0) {
    for (size_t i = 0; i < x.size(); ++i) y[i + m] = x[i];
    return y;
  }
  const std::vector<double> h = frac_delay_kernel(mu);
  // y[n] = sum_k h[k+15] * x[n - m - k]
  for (size_t i = 0; i < x.size(); ++i) {
    const double xi = x[i];
    for (int k = -kHalf; k <= kHalf; ++k) {
      const long n = static_cast<long>(i) + m + k;
      if (n >= 0 && n < static_cast<long>(out_len)) y[n] += xi * h[k + kHalf];
    }
  }
  return y;
}

double scale_to_snr(const std::vector<double>& target,
                    const std::vector<double>& interferer, double snr_db) {
  const double rt = rms(target);
  const double ri = rms(interferer);
  if (rt <= 0.0 || ri <= 0.0)
    fail(ErrorKind::Degenerate, "scale_to_snr: zero-RMS signal");
  return rt / (ri * std::pow(10.0, snr_db / 20.0));
}

std::vector<double> hann_window(int n) {
  std::vector<double> w(n);
  for (int i = 0; i < n; ++i)
    w[i] = 0.5 * (1.0 - std::cos(2.0 * M_PI * i / static_cast<double>(n)));
  return w;
}

}  // namespace dsx

#pragma once

#include <complex>
#include <vector>

#include "dsx/common.hpp"

namespace dsx {

using cplx = std::complex<double>;

// In-place iterative radix-2 FFT; size must be a power of two.
void fft(std::vector<cplx>& a, bool inverse);

size_t next_pow2(size_t n);

// Full linear convolution, output length = len(x) + len(h) - 1.
// Uses the FFT above past a small size cutoff; both paths agree to 1e-9.
std::vector<double> convolve(const std::vector<double>& x,
                             const std::vector<double>& h);
std::vector<double> convolve_direct(const std::vector<double>& x,
                                    const std::vector<double>& h);

// 31-tap Hann-windowed sinc interpolation kernel for a fractional offset
// mu in [0, 1); kernel[k] multiplies x[n - m - (k - 15)] for delay m + mu.
std::vector<double> frac_delay_kernel(double mu);

// Delay a signal by a non-negative (possibly fractional) number of samples.
// Integer delays shift exactly. Output grows by ceil(delay) + 15 samples.
std::vector<double> fractional_delay(const std::vector<double>& x,
                                     double delay_samples);

// Gain g for the interferer such that
// 20*log10(rms(target) / (g * rms(interferer))) == snr_db.
double scale_to_snr(const std::vector<double>& target,
                    const std::vector<double>& interferer, double snr_db);

std::vector<double> hann_window(int n);  // periodic

}  // namespace dsx

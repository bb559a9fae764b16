#include "dsx/microstructure.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>

#include "dsx/dsp.hpp"

namespace dsx {

void MicrostructureSpec::validate() const {
  if (holes.size() > 16) fail(ErrorKind::Argument, "at most 16 holes");
  if (diameter_m < 0.005 || diameter_m > 0.05)
    fail(ErrorKind::Argument, "diameter outside [0.005, 0.05] m");
  for (size_t i = 0; i < holes.size(); ++i) {
    const auto& h = holes[i];
    if (h.azimuth_deg < 0.0 || h.azimuth_deg >= 360.0)
      fail(ErrorKind::Argument, "hole azimuth outside [0, 360)");
    if (h.tube_length_m < 0.0 || h.tube_length_m > 0.1)
      fail(ErrorKind::Argument, "tube length outside [0, 0.1] m");
    if (h.resonator) {
      if (h.resonator->f0_hz <= 0.0 || h.resonator->f0_hz >= 12000.0)
        fail(ErrorKind::Argument, "resonator f0 outside (0, 12000)");
      if (h.resonator->q <= 0.0) fail(ErrorKind::Argument, "resonator q <= 0");
    }
    for (size_t j = i + 1; j < holes.size(); ++j)
      if (holes[j].azimuth_deg == h.azimuth_deg)
        fail(ErrorKind::Argument, "duplicate hole azimuths");
  }
}

MicrostructureSpec MicrostructureSpec::default_six_hole() {
  MicrostructureSpec s;
  s.diameter_m = 0.020;
  const double az[6] = {10, 35, 60, 100, 140, 170};
  const double tube_mm[6] = {5, 12, 19, 26, 33, 40};
  const double f0[6] = {1400, 2000, 2700, 3400, 4300, 5200};
  for (int i = 0; i < 6; ++i)
    s.holes.push_back({az[i], tube_mm[i] * 1e-3, ResonatorSpec{f0[i], 6.0, 8.0}});
  return s;
}

MicrostructureSpec MicrostructureSpec::flat() {
  MicrostructureSpec s;
  s.holes.clear();
  return s;
}

MicrostructureSpec MicrostructureSpec::scaled(const MicrostructureSpec& base,
                                              double factor) {
  MicrostructureSpec s = base;
  s.diameter_m = base.diameter_m * factor;
  for (auto& h : s.holes) {
    h.tube_length_m *= factor;
    if (h.resonator) h.resonator->f0_hz /= factor;
  }
  return s;
}

double fold_angle_deg(double theta_deg) {
  return theta_deg > 180.0 ? 360.0 - theta_deg : theta_deg;
}

namespace {

double resonator_magnitude(const ResonatorSpec& r, double f) {
  // Peaking response: unity at DC and infinity, 10^(gain/20) at f0.
  const double a = std::pow(10.0, r.gain_db / 40.0);  // |H(f0)| = a^2
  const double w = f / r.f0_hz;
  const double diff = 1.0 - w * w;
  const double num = diff * diff + (a * w / r.q) * (a * w / r.q);
  const double den = diff * diff + (w / (a * r.q)) * (w / (a * r.q));
  return std::sqrt(num / den);
}

}  // namespace

std::complex<double> direction_response(const MicrostructureSpec& spec,
                                        double theta_deg, double freq_hz) {
  const double leak = std::pow(10.0, spec.wall_leakage_db / 20.0);
  std::complex<double> m(leak, 0.0);
  for (const auto& h : spec.holes) {
    const double d = (theta_deg - h.azimuth_deg) * M_PI / 180.0;
    const double lobe = std::max(0.0, std::cos(d));
    const double g = std::pow(lobe, spec.directivity_exponent) + 0.05;
    const double r = h.resonator ? resonator_magnitude(*h.resonator, freq_hz) : 1.0;
    const double tau = h.tube_length_m / kSpeedOfSound;
    const double phase = -2.0 * M_PI * freq_hz * tau;
    m += g * r * std::complex<double>(std::cos(phase), std::sin(phase));
  }
  return m;
}

std::vector<double> direction_filter(const MicrostructureSpec& spec,
                                     double theta_deg, int taps) {
  if (theta_deg < 0.0 || theta_deg >= 360.0)
    fail(ErrorKind::Argument, "theta outside [0, 360)");
  if (taps < 64 || (taps & (taps - 1)) != 0)
    fail(ErrorKind::Argument, "taps must be a power of two >= 64");
  spec.validate();

  const double theta = fold_angle_deg(theta_deg);
  const int half = taps / 2;

  // Sample the response, impose linear phase centering the impulse response
  // at taps/2, and inverse-transform. The common group delay is recorded in
  // the bank and compensated by the renderer.
  std::vector<cplx> spectrum(taps);
  for (int k = 0; k <= half; ++k) {
    const double f = static_cast<double>(k) * kSampleRate / taps;
    cplx v = direction_response(spec, theta, f);
    const double ph = -2.0 * M_PI * k * half / static_cast<double>(taps);
    v *= cplx(std::cos(ph), std::sin(ph));
    spectrum[k] = v;
    if (k != 0 && k != half) spectrum[taps - k] = std::conj(v);
  }
  fft(spectrum, true);

  // Hann taper around the center suppresses truncation ripple.
  std::vector<double> fir(taps);
  for (int n = 0; n < taps; ++n) {
    const double win =
        0.5 * (1.0 - std::cos(2.0 * M_PI * n / static_cast<double>(taps)));
    fir[n] = spectrum[n].real() * win;
  }
  return fir;
}

std::vector<double> default_angle_grid() {
  std::vector<double> g(181);
  std::iota(g.begin(), g.end(), 0.0);
  return g;
}

DirectionFilterBank realize_bank(const MicrostructureSpec& spec,
                                 const std::vector<double>& angle_grid_deg,
                                 int taps) {
  if (angle_grid_deg.empty()) fail(ErrorKind::Argument, "empty angle grid");
  if (!std::is_sorted(angle_grid_deg.begin(), angle_grid_deg.end()))
    fail(ErrorKind::Argument, "angle grid must be sorted");
  DirectionFilterBank bank;
  bank.spec = spec;
  bank.angle_grid_deg = angle_grid_deg;
  bank.taps = taps;
  bank.center = taps / 2;
  bank.filters.reserve(angle_grid_deg.size());
  for (double a : angle_grid_deg)
    bank.filters.push_back(direction_filter(spec, a, taps));
  return bank;
}

DirectionFilterBank unit_bank(const std::vector<double>& angle_grid_deg,
                              int taps) {
  if (angle_grid_deg.empty()) fail(ErrorKind::Argument, "empty angle grid");
  DirectionFilterBank bank;
  bank.spec = MicrostructureSpec::flat();
  bank.angle_grid_deg = angle_grid_deg;
  bank.taps = taps;
  bank.center = taps / 2;
  std::vector<double> unit(taps, 0.0);
  unit[taps / 2] = 1.0;
  bank.filters.assign(angle_grid_deg.size(), unit);
  return bank;
}

int DirectionFilterBank::nearest_index(double theta_deg) const {
  const double folded = fold_angle_deg(theta_deg);
  int best = 0;
  double best_d = std::abs(angle_grid_deg[0] - folded);
  for (size_t i = 1; i < angle_grid_deg.size(); ++i) {
    const double d = std::abs(angle_grid_deg[i] - folded);
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(i);
    }
  }
  return best;
}

std::vector<double> fir_magnitude(const std::vector<double>& fir,
                                  const std::vector<double>& freq_hz) {
  std::vector<double> mag(freq_hz.size());
  for (size_t i = 0; i < freq_hz.size(); ++i) {
    const double w = 2.0 * M_PI * freq_hz[i] / kSampleRate;
    double re = 0.0, im = 0.0;
    for (size_t n = 0; n < fir.size(); ++n) {
      re += fir[n] * std::cos(w * static_cast<double>(n));
      im -= fir[n] * std::sin(w * static_cast<double>(n));
    }
    mag[i] = std::hypot(re, im);
  }
  return mag;
}

std::vector<double> spatial_diversity(const DirectionFilterBank& bank,
                                      const std::vector<double>& freq_hz) {
  if (bank.filters.empty()) fail(ErrorKind::Argument, "empty bank");
  const size_t na = bank.filters.size();
  std::vector<std::vector<double>> mags(na);
  for (size_t a = 0; a < na; ++a) mags[a] = fir_magnitude(bank.filters[a], freq_hz);

  // Shifted two-pass variance: exact zero for an angle-independent bank.
  std::vector<double> var(freq_hz.size(), 0.0);
  for (size_t i = 0; i < freq_hz.size(); ++i) {
    const double shift = mags[0][i];
    double sum = 0.0, sum_sq = 0.0;
    for (size_t a = 0; a < na; ++a) {
      const double d = mags[a][i] - shift;
      sum += d;
      sum_sq += d * d;
    }
    const double mean_d = sum / static_cast<double>(na);
    var[i] = sum_sq / static_cast<double>(na) - mean_d * mean_d;
  }
  return var;
}

std::vector<std::vector<double>> pairwise_distance_map(
    const DirectionFilterBank& bank, double f_lo, double f_hi) {
  if (!(f_lo < f_hi) || f_hi > kSampleRate / 2.0)
    fail(ErrorKind::Argument, "bad frequency band");
  // Sample the band at ~bank resolution.
  const int nf = 128;
  std::vector<double> freqs(nf);
  for (int i = 0; i < nf; ++i)
    freqs[i] = f_lo + (f_hi - f_lo) * (i + 0.5) / static_cast<double>(nf);

  const size_t na = bank.filters.size();
  std::vector<std::vector<double>> mags(na);
  for (size_t a = 0; a < na; ++a) mags[a] = fir_magnitude(bank.filters[a], freqs);

  std::vector<std::vector<double>> d(na, std::vector<double>(na, 0.0));
  for (size_t i = 0; i < na; ++i) {
    for (size_t j = i + 1; j < na; ++j) {
      double acc = 0.0;
      for (int k = 0; k < nf; ++k) {
        const double diff = mags[i][k] - mags[j][k];
        acc += diff * diff;
      }
      d[i][j] = d[j][i] = std::sqrt(acc);
    }
  }
  return d;
}

std::vector<DesignSummary> design_sweep(
    const std::vector<std::pair<std::string, MicrostructureSpec>>& specs,
    double f_lo, double f_hi) {
  if (specs.size() < 2) fail(ErrorKind::Argument, "design_sweep needs >= 2 specs");
  const auto grid = default_angle_grid();

  const int nf = 96;
  std::vector<double> freqs(nf);
  for (int i = 0; i < nf; ++i)
    freqs[i] = f_lo + (f_hi - f_lo) * (i + 0.5) / static_cast<double>(nf);

  std::vector<DesignSummary> out;
  for (const auto& [name, spec] : specs) {
    const auto bank = realize_bank(spec, grid);
    const auto var = spatial_diversity(bank, freqs);
    const auto dist = pairwise_distance_map(bank, f_lo, f_hi);
    DesignSummary s;
    s.name = name;
    s.mean_diversity =
        std::accumulate(var.begin(), var.end(), 0.0) / static_cast<double>(var.size());
    double acc = 0.0;
    size_t cnt = 0;
    for (size_t i = 0; i < dist.size(); ++i)
      for (size_t j = 0; j < dist.size(); ++j)
        if (i != j) {
          acc += dist[i][j];
          ++cnt;
        }
    s.mean_pairwise_distance = cnt ? acc / static_cast<double>(cnt) : 0.0;
    out.push_back(std::move(s));
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const DesignSummary& a, const DesignSummary& b) {
                     return a.mean_diversity > b.mean_diversity;
                   });
  return out;
}

}  // namespace dsx

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>

#include "dsx/microstructure.hpp"

using namespace dsx;

namespace {

std::vector<double> band(double lo, double hi, int n) {
  std::vector<double> f(n);
  for (int i = 0; i < n; ++i) f[i] = lo + (hi - lo) * (i + 0.5) / n;
  return f;
}

}  // namespace

TEST_CASE("single cosine-lobe hole: endpoint gains 1.05 and 0.05") {
  MicrostructureSpec s;
  s.holes = {{0.0, 0.0, std::nullopt}};
  s.wall_leakage_db = -std::numeric_limits<double>::infinity();

  const auto freqs = band(200, 8000, 24);
  const auto h0 = direction_filter(s, 0.0, 256);
  const auto h180 = direction_filter(s, 180.0, 256);
  for (double m : fir_magnitude(h0, freqs)) CHECK(m == doctest::Approx(1.05).epsilon(1e-6));
  for (double m : fir_magnitude(h180, freqs)) CHECK(m == doctest::Approx(0.05).epsilon(1e-6));
}

TEST_CASE("zero holes: leakage floor everywhere") {
  const MicrostructureSpec s = MicrostructureSpec::flat();
  const double expected = std::pow(10.0, -33.0 / 20.0);  // ~0.0224
  CHECK(expected == doctest::Approx(0.02239).epsilon(1e-3));
  for (double theta : {0.0, 45.0, 90.0, 180.0, 271.0}) {
    const auto h = direction_filter(s, theta, 256);
    for (double m : fir_magnitude(h, band(100, 11000, 30)))
      CHECK(m == doctest::Approx(expected).epsilon(1e-9));
  }
}

TEST_CASE("two equal-gain delayed paths form a comb with the analytic nulls") {
  // Place both holes at the query angle's two sides so their lobe gains are
  // equal; the sampled response must match the analytic two-path sum.
  MicrostructureSpec s;
  s.holes = {{80.0, 0.010, std::nullopt}, {100.0, 0.040, std::nullopt}};
  s.wall_leakage_db = -std::numeric_limits<double>::infinity();
  const double theta = 90.0;

  const double tau1 = 0.010 / kSpeedOfSound;
  const double tau2 = 0.040 / kSpeedOfSound;
  const double g = std::pow(std::cos(10.0 * M_PI / 180.0), 2.0) + 0.05;

  for (double f : band(200, 10000, 50)) {
    const auto analytic =
        g * (std::polar(1.0, -2.0 * M_PI * f * tau1) +
             std::polar(1.0, -2.0 * M_PI * f * tau2));
    const auto sampled = direction_response(s, theta, f);
    CHECK(std::abs(sampled - analytic) < 1e-12);
  }
  // Null positions: f = (2k+1) / (2 |tau1 - tau2|).
  const double dt = tau2 - tau1;
  for (int k = 0; k < 3; ++k) {
    const double f_null = (2 * k + 1) / (2.0 * dt);
    if (f_null > 11000) break;
    CHECK(std::abs(direction_response(s, theta, f_null)) < 1e-9);
  }
}

TEST_CASE("resonator peak gain and unity floor") {
  MicrostructureSpec s;
  s.holes = {{0.0, 0.0, ResonatorSpec{2000.0, 6.0, 8.0}}};
  s.wall_leakage_db = -std::numeric_limits<double>::infinity();
  const double at_peak = std::abs(direction_response(s, 0.0, 2000.0));
  CHECK(at_peak == doctest::Approx(1.05 * std::pow(10.0, 8.0 / 20.0)).epsilon(1e-9));
  const double far_below = std::abs(direction_response(s, 0.0, 40.0));
  CHECK(far_below == doctest::Approx(1.05).epsilon(1e-3));
}

TEST_CASE("realize_bank cardinality and equivalence") {
  const auto spec = MicrostructureSpec::default_six_hole();
  const auto bank = realize_bank(spec, default_angle_grid());
  CHECK(bank.filters.size() == 181);

  const auto single = realize_bank(spec, {90.0});
  CHECK(single.filters.size() == 1);
  const auto direct = direction_filter(spec, 90.0, 256);
  for (size_t i = 0; i < direct.size(); ++i)
    CHECK(single.filters[0][i] == direct[i]);

  CHECK_THROWS_AS(realize_bank(spec, {}), Error);
}

TEST_CASE("angles fold onto the measured semicircle") {
  CHECK(fold_angle_deg(190.0) == doctest::Approx(170.0));
  CHECK(fold_angle_deg(350.0) == doctest::Approx(10.0));
  const auto spec = MicrostructureSpec::default_six_hole();
  const auto a = direction_filter(spec, 200.0, 128);
  const auto b = direction_filter(spec, 160.0, 128);
  for (size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("spatial diversity: flat bank is exactly zero") {
  const auto bank = realize_bank(MicrostructureSpec::flat(), default_angle_grid());
  for (double v : spatial_diversity(bank, band(100, 11000, 40))) CHECK(v == 0.0);
}

TEST_CASE("spatial diversity of a two-point magnitude distribution is one") {
  // Hand-built bank: half the angles have |M| = 0, half |M| = 2.
  DirectionFilterBank bank;
  bank.angle_grid_deg = {0, 1, 2, 3};
  bank.taps = 64;
  bank.center = 32;
  std::vector<double> zero(64, 0.0), two(64, 0.0);
  two[32] = 2.0;
  bank.filters = {zero, two, zero, two};
  for (double v : spatial_diversity(bank, band(500, 4000, 8)))
    CHECK(v == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("diversity is permutation-invariant and quadratic in scale") {
  const auto spec = MicrostructureSpec::default_six_hole();
  std::vector<double> grid;
  for (int a = 0; a <= 180; a += 5) grid.push_back(a);
  auto bank = realize_bank(spec, grid);
  const auto freqs = band(1000, 4000, 16);
  const auto v1 = spatial_diversity(bank, freqs);

  // Permute the filter order (variance ignores order).
  auto permuted = bank;
  std::rotate(permuted.filters.begin(), permuted.filters.begin() + 7,
              permuted.filters.end());
  const auto v2 = spatial_diversity(permuted, freqs);
  for (size_t i = 0; i < v1.size(); ++i)
    CHECK(v1[i] == doctest::Approx(v2[i]).epsilon(1e-12));

  // Scale all FIRs by c: variance scales by c^2, distances by |c|.
  auto scaled = bank;
  for (auto& f : scaled.filters)
    for (auto& x : f) x *= -3.0;
  const auto v3 = spatial_diversity(scaled, freqs);
  for (size_t i = 0; i < v1.size(); ++i)
    CHECK(v3[i] == doctest::Approx(9.0 * v1[i]).epsilon(1e-9));
  const auto d1 = pairwise_distance_map(bank, 1000, 4000);
  const auto d3 = pairwise_distance_map(scaled, 1000, 4000);
  for (size_t i = 0; i < d1.size(); ++i)
    for (size_t j = 0; j < d1.size(); ++j)
      CHECK(d3[i][j] == doctest::Approx(3.0 * d1[i][j]).epsilon(1e-9));
}

TEST_CASE("magnitude bound and nonzero floor over the semicircle") {
  const auto spec = MicrostructureSpec::default_six_hole();
  double max_gain_db = 0.0;
  for (const auto& h : spec.holes)
    if (h.resonator) max_gain_db = std::max(max_gain_db, h.resonator->gain_db);
  const double leak = std::pow(10.0, spec.wall_leakage_db / 20.0);
  const double bound =
      spec.holes.size() * 1.05 * std::pow(10.0, max_gain_db / 20.0) + leak;
  for (double theta = 0.0; theta <= 180.0; theta += 7.5) {
    for (double f : band(50, 11500, 40)) {
      const double m = std::abs(direction_response(spec, theta, f));
      CHECK(m <= bound);
      CHECK(m > 0.0);
    }
  }
}

TEST_CASE("pairwise distance map: symmetry, zero diagonal, flat bank zero") {
  const auto spec = MicrostructureSpec::default_six_hole();
  std::vector<double> grid = {0, 30, 60, 90, 120, 150, 180};
  const auto bank = realize_bank(spec, grid);
  const auto d = pairwise_distance_map(bank, 1000, 4000);
  for (size_t i = 0; i < d.size(); ++i) {
    CHECK(d[i][i] == 0.0);
    for (size_t j = 0; j < d.size(); ++j) CHECK(d[i][j] == d[j][i]);
  }
  const auto flat = realize_bank(MicrostructureSpec::flat(), grid);
  for (const auto& row : pairwise_distance_map(flat, 1000, 4000))
    for (double v : row) CHECK(v == 0.0);
}

TEST_CASE("design sweep ranks the shipped design over flat; ties keep order") {
  const auto sweep = design_sweep(
      {{"default6", MicrostructureSpec::default_six_hole()},
       {"flat", MicrostructureSpec::flat()}},
      1000, 4000);
  CHECK(sweep[0].name == "default6");
  CHECK(sweep[1].mean_diversity == 0.0);

  const auto ties = design_sweep({{"a", MicrostructureSpec::default_six_hole()},
                                  {"b", MicrostructureSpec::default_six_hole()}},
                                 1000, 4000);
  CHECK(ties[0].name == "a");
  CHECK(ties[0].mean_diversity == doctest::Approx(ties[1].mean_diversity));

  CHECK_THROWS_AS(design_sweep({}, 1000, 4000), Error);
  CHECK_THROWS_AS(
      design_sweep({{"only", MicrostructureSpec::flat()}}, 1000, 4000), Error);
}

TEST_CASE("default design beats the flat bank at >= 90% of 1-4 kHz bins") {
  // Regression over the shipped default spec.
  const auto freqs = band(1000, 4000, 64);
  std::vector<double> grid;
  for (int a = 0; a <= 180; a += 2) grid.push_back(a);
  const auto v_default =
      spatial_diversity(realize_bank(MicrostructureSpec::default_six_hole(), grid), freqs);
  const auto v_flat =
      spatial_diversity(realize_bank(MicrostructureSpec::flat(), grid), freqs);
  int better = 0;
  for (size_t i = 0; i < freqs.size(); ++i)
    if (v_default[i] > v_flat[i]) ++better;
  CHECK(better >= static_cast<int>(0.9 * freqs.size()));
}

TEST_CASE("invalid inputs raise argument errors") {
  const auto spec = MicrostructureSpec::default_six_hole();
  CHECK_THROWS_AS(direction_filter(spec, -1.0, 256), Error);
  CHECK_THROWS_AS(direction_filter(spec, 360.0, 256), Error);
  CHECK_THROWS_AS(direction_filter(spec, 10.0, 100), Error);  // not a power of two
  MicrostructureSpec bad = spec;
  bad.diameter_m = 0.3;
  CHECK_THROWS_AS(direction_filter(bad, 10.0, 256), Error);
}

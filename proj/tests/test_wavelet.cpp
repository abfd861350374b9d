#include <doctest.h>

#include "iterrain/raster.hpp"
#include "iterrain/wavelet.hpp"
#include "oracles.hpp"

using namespace iterrain;

namespace {

Grid random_grid(int w, int h, std::uint64_t seed) {
  Rng rng(seed);
  Grid g(w, h);
  for (auto& v : g.values) v = rng.uniform(-1.0, 1.0);
  return g;
}

Grid shifted(const Grid& g, int dx, int dy) {
  Grid out(g.width, g.height);
  for (int y = 0; y < g.height; ++y)
    for (int x = 0; x < g.width; ++x) out((x + dx) % g.width, (y + dy) % g.height) = g(x, y);
  return out;
}

double energy(const Grid& g) {
  double s = 0.0;
  for (double v : g.values) s += v * v;
  return s;
}

double max_abs_diff(const Grid& a, const Grid& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.values[i] - b.values[i]));
  return m;
}

}  // namespace

TEST_CASE("swt2_haar: constants live in the approximation") {
  const auto levels = swt2_haar(Grid(12, 10, 0.37), 2);
  REQUIRE(levels.size() == 2);
  for (const auto& l : levels) {
    for (double v : l.approx.values) CHECK(v == 0.37);
    for (const Grid* d : {&l.detail_h, &l.detail_v, &l.detail_d})
      for (double v : d->values) CHECK(v == 0.0);
  }
}

TEST_CASE("swt2_haar: step row against direct periodic convolution") {
  Grid g(8, 4);
  const double row[8] = {0, 0, 1, 1, 0, 0, 0, 0};
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 8; ++x) g(x, y) = row[x];
  const auto l1 = swt2_haar(g, 1)[0];
  for (int x = 0; x < 8; ++x) {
    const double expected = 0.5 * (row[x] - row[(x + 7) % 8]);
    CHECK(l1.detail_h(x, 2) == expected);
  }
  const double lo[2] = {0.5, 0.5};
  const double hi[2] = {0.5, -0.5};
  CHECK(max_abs_diff(l1.detail_h, oracle::haar_direct(g, 1, hi, lo)) == 0.0);
}

TEST_CASE("swt2_haar: all bands match the direct a-trous oracle") {
  const Grid g = random_grid(24, 20, 11);
  const double lo[2] = {0.5, 0.5};
  const double hi[2] = {0.5, -0.5};
  const auto levels = swt2_haar(g, 2);
  const Grid& a1 = levels[0].approx;
  CHECK(max_abs_diff(a1, oracle::haar_direct(g, 1, lo, lo)) < 1e-15);
  CHECK(max_abs_diff(levels[0].detail_h, oracle::haar_direct(g, 1, hi, lo)) < 1e-15);
  CHECK(max_abs_diff(levels[0].detail_v, oracle::haar_direct(g, 1, lo, hi)) < 1e-15);
  CHECK(max_abs_diff(levels[0].detail_d, oracle::haar_direct(g, 1, hi, hi)) < 1e-15);
  CHECK(max_abs_diff(levels[1].approx, oracle::haar_direct(a1, 2, lo, lo)) < 1e-15);
  CHECK(max_abs_diff(levels[1].detail_h, oracle::haar_direct(a1, 2, hi, lo)) < 1e-15);
  CHECK(max_abs_diff(levels[1].detail_v, oracle::haar_direct(a1, 2, lo, hi)) < 1e-15);
  CHECK(max_abs_diff(levels[1].detail_d, oracle::haar_direct(a1, 2, hi, hi)) < 1e-15);
}

TEST_CASE("swt2_haar: circular shifts commute with the transform") {
  const Grid g = random_grid(32, 28, 12);
  const auto base = swt2_haar(g, 2);
  const auto moved = swt2_haar(shifted(g, 3, 5), 2);
  for (std::size_t l = 0; l < 2; ++l) {
    CHECK(max_abs_diff(shifted(base[l].approx, 3, 5), moved[l].approx) < 1e-12);
    CHECK(max_abs_diff(shifted(base[l].detail_h, 3, 5), moved[l].detail_h) < 1e-12);
    CHECK(max_abs_diff(shifted(base[l].detail_v, 3, 5), moved[l].detail_v) < 1e-12);
    CHECK(max_abs_diff(shifted(base[l].detail_d, 3, 5), moved[l].detail_d) < 1e-12);
  }
}

TEST_CASE("swt2_haar: energy is preserved level by level") {
  for (std::uint64_t s = 1; s <= 5; ++s) {
    const Grid g = random_grid(30, 18, s);
    const auto levels = swt2_haar(g, 2);
    const Grid* in = &g;
    for (const auto& l : levels) {
      const double e = energy(l.approx) + energy(l.detail_h) + energy(l.detail_v) + energy(l.detail_d);
      CHECK(oracle::rel_err(e, energy(*in)) < 1e-8);
      in = &l.approx;
    }
  }
}

TEST_CASE("swt2_haar: preconditions") {
  CHECK_THROWS_AS(swt2_haar(Grid(8, 8), 3), ArgumentError);
  CHECK_THROWS_AS(swt2_haar(Grid(8, 8), 0), ArgumentError);
  CHECK_THROWS_AS(swt2_haar(Grid(3, 8), 1), ArgumentError);
}

TEST_CASE("swt2_haar: piecewise-constant blocks have zero detail away from edges") {
  Grid g(32, 32);
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x) g(x, y) = (x >= 8 && x < 24 && y >= 8 && y < 24) ? 2.0 : -1.0;
  const auto levels = swt2_haar(g, 2);
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x) {
      // Level-2 taps reach three nodes back; stay clear of the edges at 8 and 24.
      const bool near = (x >= 8 && x < 11) || (x >= 24 && x < 27) || (y >= 8 && y < 11) || (y >= 24 && y < 27);
      if (near) continue;
      for (const auto& l : levels) {
        CHECK(l.detail_h(x, y) == 0.0);
        CHECK(l.detail_v(x, y) == 0.0);
        CHECK(l.detail_d(x, y) == 0.0);
      }
    }
}

TEST_CASE("build_features") {
  SUBCASE("zero residual") {
    const auto raw = complexity_channels(Grid(16, 16));
    for (const auto& c : raw)
      for (double v : c.values) CHECK(v == 0.0);
    const SwtFeatures f = build_features(Grid(16, 16));
    for (const auto& c : f.channels)
      for (double v : c.values) CHECK(v == 0.0);
  }
  SUBCASE("tilted plane") {
    const int n = 20;
    Grid r(n, n);
    for (int y = 0; y < n; ++y)
      for (int x = 0; x < n; ++x) r(x, y) = node_coord(x, n);
    const auto raw = complexity_channels(r);
    for (double v : raw[6].values) CHECK(v == doctest::Approx(1.0).epsilon(1e-12));
    // Away from the periodic wrap: the x high-pass sees the constant step
    // (s / 2 per unit slope with spacing s / 19), every other detail vanishes.
    const double step = 1.0 / (n - 1);
    for (std::size_t c = 0; c < 6; ++c)
      for (int y = 0; y < n; ++y)
        for (int x = 3; x < n; ++x) {
          const double expected = c == 0 ? 0.5 * step : c == 3 ? step : 0.0;
          CHECK(std::abs(raw[c](x, y) - expected) < 1e-12);
        }
    const SwtFeatures f = build_features(r);
    for (double v : f.channels[6].values) CHECK(v == 0.0);  // constant channel
    for (std::size_t c = 0; c < kFeatureChannels; ++c) CHECK(f.channels[c].width == n);
  }
  SUBCASE("random residual is z-scored") {
    const SwtFeatures f = build_features(random_grid(64, 64, 13));
    for (std::size_t c = 0; c < kFeatureChannels; ++c) {
      double mean = 0.0;
      for (double v : f.channels[c].values) mean += v;
      mean /= 4096.0;
      double var = 0.0;
      for (double v : f.channels[c].values) var += (v - mean) * (v - mean);
      CHECK(std::abs(mean) < 1e-6);
      CHECK(std::abs(std::sqrt(var / 4096.0) - 1.0) < 1e-6);
      CHECK(f.stddev[c] > 0.0);
    }
    const auto raw = complexity_channels(random_grid(64, 64, 13));
    for (const auto& c : raw)
      for (double v : c.values) CHECK(v >= 0.0);
  }
}

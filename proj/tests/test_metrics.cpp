#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "iterrain/metrics.hpp"

using namespace iterrain;

namespace {

Grid random_grid(int w, int h, Rng& rng) {
  Grid g(w, h);
  for (auto& v : g.values) v = rng.uniform();
  return g;
}

}  // namespace

TEST_CASE("psnr") {
  Rng rng(1);
  const Grid a = random_grid(13, 11, rng);
  SUBCASE("identical grids are lossless") {
    CHECK(std::isinf(psnr(a, a)));
    CHECK(format_psnr(psnr(a, a)) == "lossless");
  }
  SUBCASE("uniform error of 1e-3 gives 60 dB") {
    Grid b = a;
    for (auto& v : b.values) v += 1e-3;
    CHECK(psnr(b, a) == doctest::Approx(60.0).epsilon(1e-9));
    CHECK(format_psnr(60.0) == "60");
  }
  SUBCASE("direct summation oracle") {
    for (int trial = 0; trial < 20; ++trial) {
      const Grid p = random_grid(17, 9, rng);
      const Grid t = random_grid(17, 9, rng);
      long double acc = 0;
      for (int y = 0; y < 9; ++y)
        for (int x = 0; x < 17; ++x) acc += (long double)(p(x, y) - t(x, y)) * (p(x, y) - t(x, y));
      const double expected = -10.0 * std::log10(static_cast<double>(acc / (17 * 9)));
      CHECK(std::abs(psnr(p, t) - expected) < 1e-10);
    }
  }
  SUBCASE("permutation invariance") {
    const Grid t = random_grid(13, 11, rng);
    std::vector<std::size_t> perm(a.size());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    std::shuffle(perm.begin(), perm.end(), std::mt19937_64(5));
    Grid pa(13, 11), pt(13, 11);
    for (std::size_t i = 0; i < perm.size(); ++i) {
      pa.values[i] = a.values[perm[i]];
      pt.values[i] = t.values[perm[i]];
    }
    CHECK(psnr(pa, pt) == doctest::Approx(psnr(a, t)).epsilon(1e-12));
  }
  SUBCASE("dimension mismatch") { CHECK_THROWS_AS(psnr(a, Grid(11, 13)), ArgumentError); }
}

TEST_CASE("grad_mae") {
  Rng rng(2);
  GradientGrid a{random_grid(8, 6, rng), random_grid(8, 6, rng)};
  CHECK(grad_mae(a, a) == 0.0);
  GradientGrid b = a;
  for (auto& v : b.gx.values) v += 0.1;
  CHECK(grad_mae(b, a) == doctest::Approx(0.1).epsilon(1e-12));
  const GradientGrid c{random_grid(8, 6, rng), random_grid(8, 6, rng)};
  double acc = 0.0;
  for (int y = 0; y < 6; ++y)
    for (int x = 0; x < 8; ++x) acc += std::abs(a.gx(x, y) - c.gx(x, y)) + std::abs(a.gy(x, y) - c.gy(x, y));
  CHECK(std::abs(grad_mae(a, c) - acc / 48.0) < 1e-12);
  CHECK_THROWS_AS(grad_mae(a, GradientGrid{Grid(6, 8), Grid(6, 8)}), ArgumentError);
}

TEST_CASE("mae_maxae") {
  Grid t(2, 2, 0.25);
  Grid p = t;
  const AbsErrors zero = mae_maxae(p, t, 100.0);
  CHECK(zero.mae == 0.0);
  CHECK(zero.maxae == 0.0);
  p(1, 0) += 0.5;
  const AbsErrors e = mae_maxae(p, t, 100.0);
  CHECK(e.mae == doctest::Approx(12.5));
  CHECK(e.maxae == doctest::Approx(50.0));

  Rng rng(3);
  const Grid a = random_grid(9, 7, rng);
  const Grid b = random_grid(9, 7, rng);
  double sum = 0.0, mx = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sum += std::abs(a.values[i] - b.values[i]);
    mx = std::max(mx, std::abs(a.values[i] - b.values[i]));
  }
  const AbsErrors r = mae_maxae(a, b, 37.0);
  CHECK(r.mae == sum / 63.0 * 37.0);
  CHECK(r.maxae == mx * 37.0);
  CHECK(r.mae <= r.maxae);
  const AbsErrors r3 = mae_maxae(a, b, 111.0);
  CHECK(r3.mae == doctest::Approx(3.0 * r.mae).epsilon(1e-14));
  CHECK(r3.maxae == doctest::Approx(3.0 * r.maxae).epsilon(1e-14));
  CHECK_THROWS_AS(mae_maxae(a, b, 0.0), ArgumentError);
}

TEST_CASE("report text") {
  FidelityReport r;
  r.psnr_db = 48.25;
  r.mae_m = 0.5;
  r.maxae_m = 2.0;
  r.gradmae = 0.125;
  r.bpp = 3.5;
  r.timings_ms = {{"shape", 10.0}};
  CHECK(r.to_text() == "psnr_db=48.25\nmae_m=0.5\nmaxae_m=2\ngradmae=0.125\nbpp=3.5\nshape_ms=10\n");
  FidelityReport l;
  l.psnr_db = std::numeric_limits<double>::infinity();
  CHECK(l.to_text().rfind("psnr_db=lossless\n", 0) == 0);
}

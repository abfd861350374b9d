#include <doctest.h>

#include <set>

#include "fixtures.hpp"
#include "iterrain/analysis.hpp"
#include "iterrain/fastmath.hpp"
#include "iterrain/siren.hpp"
#include "oracles.hpp"

using namespace iterrain;

namespace {

int linf(const std::array<int, 2>& w) { return std::max(std::abs(w[0]), std::abs(w[1])); }

SirenStage single_sine_x() {
  SirenStage s = make_stage(explicit_frequency_table({{1, 0}}, {0.0}, {0}), 0, 0, 1.0);
  s.layers.output.weight(0, 0) = 1.0;
  return s;
}

}  // namespace

TEST_CASE("frequency tables: shape and geometry configurations") {
  const FrequencyTable shape = build_frequency_table(shape_frequency_config(3));
  CHECK(shape.size() == 128);
  CHECK(shape.band_count == 1);
  for (const auto& w : shape.rows) CHECK(linf(w) <= 10);

  const FrequencyTable geom = build_frequency_table(geometry_frequency_config(3));
  CHECK(geom.size() == 128);
  CHECK(geom.band_sizes() == std::vector<int>{64, 16, 16, 16, 16});
  const int lo[5] = {0, 6, 14, 22, 31};
  const int hi[5] = {6, 14, 22, 31, 40};
  for (int i = 0; i < geom.size(); ++i) {
    const int b = geom.band_of[static_cast<std::size_t>(i)];
    const int n = linf(geom.rows[static_cast<std::size_t>(i)]);
    CHECK(n > lo[b]);
    CHECK(n <= hi[b]);
  }
}

TEST_CASE("frequency tables: canonical half lattice without duplicates") {
  for (std::uint64_t seed : {1u, 2u, 77u}) {
    const FrequencyTable t = build_frequency_table(geometry_frequency_config(seed));
    std::set<std::array<int, 2>> seen;
    for (const auto& w : t.rows) {
      CHECK((w[0] > 0 || (w[0] == 0 && w[1] > 0)));
      CHECK(seen.insert(w).second);
      CHECK(seen.count({-w[0], -w[1]}) == 0);
    }
    for (double p : t.phases) {
      CHECK(p >= 0.0);
      CHECK(p < kTwoPi);
    }
  }
}

TEST_CASE("frequency tables: pool sizes and exhaustion") {
  // Band 0 of the shape layout holds exactly 220 half-lattice points.
  FrequencyConfig full{5, 10, {}, {220}};
  CHECK(build_frequency_table(full).size() == 220);
  full.band_sizes = {221};
  CHECK_THROWS_AS(build_frequency_table(full), ArgumentError);
  // Geometry band 0 (||w|| <= 6) holds 84.
  FrequencyConfig g{5, 6, {}, {84}};
  CHECK(build_frequency_table(g).size() == 84);
  // K = 1 with an annulus (6, 7] of 28 points.
  FrequencyConfig k1{5, 6, {7}, {10, 29}};
  CHECK_THROWS_AS(build_frequency_table(k1), ArgumentError);
  k1.band_sizes = {10, 28};
  CHECK(build_frequency_table(k1).size() == 38);
}

TEST_CASE("frequency tables: regeneration is bit-identical") {
  const auto a = build_frequency_table(geometry_frequency_config(42));
  const auto b = build_frequency_table(geometry_frequency_config(42));
  CHECK(a.rows == b.rows);
  CHECK(a.phases == b.phases);
  CHECK(a.band_of == b.band_of);
  CHECK(build_frequency_table(geometry_frequency_config(43)).rows != a.rows);
}

TEST_CASE("hand-built product of sines") {
  const SirenStage s = product_of_sines_stage();
  CHECK(forward(s, {0.25, 0.25}) == doctest::Approx(1.0).epsilon(1e-15));
  const EvalResult g = eval_with_grad(s, {0.25, 0.25});
  CHECK(std::abs(g.grad[0]) < 1e-14);
  CHECK(std::abs(g.grad[1]) < 1e-14);
  const EvalResult h = eval_with_hessian(s, {0.25, 0.25});
  const double c = -4.0 * kPi * kPi;
  CHECK(std::abs((*h.hessian)[0][0] - c) < 1e-9);
  CHECK(std::abs((*h.hessian)[1][1] - c) < 1e-9);
  CHECK(std::abs((*h.hessian)[0][1]) < 1e-9);
  Rng rng(5);
  for (int i = 0; i < 50; ++i) {
    const Vec2 p{rng.uniform(), rng.uniform()};
    CHECK(forward(s, p) == doctest::Approx(std::sin(kTwoPi * p[0]) * std::sin(kTwoPi * p[1])).epsilon(1e-13));
  }
}

TEST_CASE("single-frequency stage gradient") {
  const EvalResult r = eval_with_grad(single_sine_x(), {0.0, 0.3});
  CHECK(r.grad[0] == doctest::Approx(kTwoPi).epsilon(1e-15));
  CHECK(r.grad[1] == 0.0);
}

TEST_CASE("analytical gradients match finite differences") {
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    const SirenStage s = fixture::random_stage(seed);
    const auto mask = fixture::random_mask(s, seed);
    Rng rng(seed + 1000);
    const Vec2 p{rng.uniform(), rng.uniform()};
    const EvalResult r = eval_with_grad(s, p, mask);
    const double fx = fixture::fd5([&](double t) { return forward(s, {t, p[1]}, mask); }, p[0], 1e-4);
    const double fy = fixture::fd5([&](double t) { return forward(s, {p[0], t}, mask); }, p[1], 1e-4);
    CAPTURE(seed);
    CHECK(fixture::vec_rel_err(r.grad[0], r.grad[1], fx, fy) < 1e-6);
    CHECK(r.value == forward(s, p, mask));
  }
}

TEST_CASE("analytical Hessians match finite differences of the gradient") {
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    const SirenStage s = fixture::random_stage(seed);
    Rng rng(seed + 2000);
    const Vec2 p{rng.uniform(), rng.uniform()};
    const EvalResult r = eval_with_hessian(s, p);
    const auto& h = *r.hessian;
    auto gx = [&](Vec2 q) { return eval_with_grad(s, q).grad[0]; };
    auto gy = [&](Vec2 q) { return eval_with_grad(s, q).grad[1]; };
    const double hxx = fixture::fd5([&](double t) { return gx({t, p[1]}); }, p[0], 1e-4);
    const double hxy = fixture::fd5([&](double t) { return gx({p[0], t}); }, p[1], 1e-4);
    const double hyx = fixture::fd5([&](double t) { return gy({t, p[1]}); }, p[0], 1e-4);
    const double hyy = fixture::fd5([&](double t) { return gy({p[0], t}); }, p[1], 1e-4);
    const double scale = std::max({std::abs(hxx), std::abs(hxy), std::abs(hyy), 1e-6});
    CAPTURE(seed);
    CHECK(std::abs(h[0][0] - hxx) / scale < 1e-5);
    CHECK(std::abs(h[0][1] - hxy) / scale < 1e-5);
    CHECK(std::abs(h[1][0] - hyx) / scale < 1e-5);
    CHECK(std::abs(h[1][1] - hyy) / scale < 1e-5);
    CHECK(h[0][1] == h[1][0]);
    const EvalResult g = eval_with_grad(s, p);
    CHECK(std::abs(r.value - g.value) <= 1e-14 * std::max(1.0, std::abs(g.value)));
    CHECK(fixture::vec_rel_err(r.grad[0], r.grad[1], g.grad[0], g.grad[1], 1e-12) < 1e-13);
  }
}

TEST_CASE("masking a band equals deleting it") {
  const SirenStage s = init_trainable(make_stage(build_frequency_table(geometry_frequency_config(9)), 16, 2, 150.0), 4);
  std::vector<double> mask(128);
  std::vector<std::array<int, 2>> rows;
  std::vector<double> phases;
  std::vector<Eigen::Index> keep;
  for (int i = 0; i < 128; ++i) {
    const bool low = s.freq.band_of[static_cast<std::size_t>(i)] == 0;
    mask[static_cast<std::size_t>(i)] = low ? 1.0 : 0.0;
    if (low) {
      rows.push_back(s.freq.rows[static_cast<std::size_t>(i)]);
      phases.push_back(s.freq.phases[static_cast<std::size_t>(i)]);
      keep.push_back(i);
    }
  }
  SirenStage sub = make_stage(explicit_frequency_table(rows, phases, std::vector<int>(rows.size(), 0)), 16, 2, 150.0);
  sub.layers = s.layers;
  sub.layers.hidden[0].weight = s.layers.hidden[0].weight(Eigen::all, keep);
  Rng rng(6);
  for (int i = 0; i < 20; ++i) {
    const Vec2 p{rng.uniform(), rng.uniform()};
    CHECK(std::abs(forward(s, p, mask) - forward(sub, p)) < 1e-14);
  }
}

TEST_CASE("mask changes move the output continuously") {
  const SirenStage s = fixture::random_stage(21);
  auto m = fixture::random_mask(s, 3);
  const Vec2 p{0.3, 0.6};
  const double base = forward(s, p, m);
  for (double eps : {1e-3, 1e-5, 1e-7}) {
    auto m2 = m;
    for (auto& v : m2) v = std::min(1.0, v + eps);
    CHECK(std::abs(forward(s, p, m2) - base) < 1e3 * eps);
  }
}

TEST_CASE("evaluation is pure") {
  const SirenStage s = fixture::random_stage(4);
  CHECK(forward(s, {0.1, 0.9}) == forward(s, {0.1, 0.9}));
}

TEST_CASE("batch evaluation agrees with per-point evaluation") {
  const SirenStage s = fixture::random_stage(17, 32);
  SUBCASE("batch of one is bit-identical") {
    const Vec2 p{0.42, 0.17};
    const auto b = batch_eval(s, std::vector<Vec2>{p}, EvalMode::value_grad);
    const EvalResult r = eval_with_grad(s, p);
    CHECK(b[0].value == r.value);
    CHECK(b[0].grad == r.grad);
    const auto bh = batch_eval_hessian(s, std::vector<Vec2>{p});
    CHECK(*bh[0].hessian == *eval_with_hessian(s, p).hessian);
  }
  SUBCASE("10^4 random coordinates") {
    Rng rng(8);
    std::vector<Vec2> pts(10000);
    for (auto& p : pts) p = {rng.uniform(), rng.uniform()};
    pts[77] = pts[5000];
    const auto b = batch_eval(s, pts, EvalMode::value_grad);
    double worst = 0.0;
    for (std::size_t i = 0; i < pts.size(); i += 7) {
      const EvalResult r = eval_with_grad(s, pts[i]);
      worst = std::max({worst, std::abs(b[i].value - r.value), std::abs(b[i].grad[0] - r.grad[0]),
                        std::abs(b[i].grad[1] - r.grad[1])});
    }
    CHECK(worst < 1e-10);
    CHECK(b[77].value == b[5000].value);
    CHECK(b[77].grad == b[5000].grad);
  }
  SUBCASE("masked batches use one column per point") {
    Rng rng(9);
    std::vector<Vec2> pts(300);
    for (auto& p : pts) p = {rng.uniform(), rng.uniform()};
    Eigen::MatrixXd masks(s.input_size(), 300);
    for (Eigen::Index j = 0; j < 300; ++j) {
      const auto m = fixture::random_mask(s, static_cast<std::uint64_t>(j));
      for (Eigen::Index i = 0; i < s.input_size(); ++i) masks(i, j) = m[static_cast<std::size_t>(i)];
    }
    const auto b = batch_eval(s, pts, masks, EvalMode::value_grad);
    for (std::size_t j = 0; j < 300; j += 13) {
      const auto m = fixture::random_mask(s, j);
      CHECK(std::abs(b[j].value - forward(s, pts[j], m)) < 1e-12);
    }
  }
  SUBCASE("empty batch is rejected") { CHECK_THROWS_AS(batch_eval_hessian(s, std::vector<Vec2>{}), ArgumentError); }
}

TEST_CASE("domain tolerance") {
  const SirenStage s = fixture::random_stage(2);
  CHECK_NOTHROW(forward(s, {-0.1, 1.1}));
  CHECK_THROWS_AS(forward(s, {-0.11, 0.5}), DomainError);
  CHECK_THROWS_AS(eval_with_grad(s, {0.5, 2.0}), DomainError);
  CHECK_THROWS_AS(forward(s, {std::nan(""), 0.5}), DomainError);
  CHECK_THROWS_AS(forward(s, {0.5, 0.5}, std::vector<double>(3, 1.0)), ArgumentError);
}

TEST_CASE("SIREN initialization") {
  const FrequencyTable t = build_frequency_table(shape_frequency_config(1));
  const SirenStage a = init_trainable(make_stage(t, 128, 3, 150.0), 11);
  const SirenStage b = init_trainable(make_stage(t, 128, 3, 150.0), 11);
  const SirenStage c = init_trainable(make_stage(t, 128, 3, 30.0), 11);
  std::vector<double> pa(a.layers.parameter_count()), pb(pa.size()), pc(pa.size());
  a.layers.gather(pa);
  b.layers.gather(pb);
  c.layers.gather(pc);
  CHECK(pa == pb);
  const double bound = std::sqrt(6.0 / 128.0) / 150.0;
  CHECK(bound == doctest::Approx(1.443e-3).epsilon(1e-3));
  for (const auto& l : a.layers.hidden) {
    CHECK(l.weight.cwiseAbs().maxCoeff() <= bound);
    CHECK(l.bias.isZero(0.0));
  }
  for (std::size_t i = 0; i < pa.size(); ++i) {
    if (pa[i] == 0.0) continue;
    CHECK(std::abs(pc[i] / pa[i] - 5.0) < 4e-15);
  }
}

TEST_CASE("parameter gather and scatter round trip") {
  SirenStage s = fixture::random_stage(12);
  std::vector<double> p(s.layers.parameter_count());
  s.layers.gather(p);
  for (auto& v : p) v *= 2.0;
  s.layers.scatter(p);
  std::vector<double> q(p.size());
  s.layers.gather(q);
  CHECK(p == q);
}

TEST_CASE("sincos_array matches the standard library") {
  Rng rng(41);
  std::vector<double> x;
  for (int i = 0; i < 200000; ++i) x.push_back(rng.uniform(-3e3, 3e3));
  for (int i = 0; i < 2000; ++i) x.push_back(rng.uniform(-2e6, 2e6));
  for (double v : {0.0, -0.0, kPi / 2, kPi, 1e-300, 999999.5, 1e6 + 1})
    x.push_back(v);
  std::vector<double> s(x.size()), c(x.size()), s2(x.size());
  sincos_array(x.data(), s.data(), c.data(), x.size());
  sin_array(x.data(), s2.data(), x.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    worst = std::max({worst, std::abs(s[i] - std::sin(x[i])), std::abs(c[i] - std::cos(x[i]))});
    worst = std::max(worst, std::abs(s2[i] - std::sin(x[i])));
  }
  CHECK(worst < 4.0 * std::numeric_limits<double>::epsilon());
}

#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <map>

#include "fixtures.hpp"
#include "model_fixtures.hpp"
#include "iterrain/container.hpp"
#include "iterrain/entropy.hpp"
#include "iterrain/quantize.hpp"
#include "iterrain/sensitivity.hpp"
#include "iterrain/trainer.hpp"

using namespace iterrain;
using fixture::flatten;
using fixture::random_matrix;
using fixture::randomize;
using fixture::synthetic_model;

namespace {

double shannon_bytes(const std::vector<std::int32_t>& s) {
  std::map<std::int32_t, double> counts;
  for (auto x : s) counts[x] += 1.0;
  double bits = 0.0;
  const double n = static_cast<double>(s.size());
  for (const auto& [k, c] : counts) bits -= c * std::log2(c / n);
  return bits / 8.0;
}

std::filesystem::path golden_path() { return std::filesystem::path(ITERRAIN_TEST_DATA) / "golden_small.itv"; }

}  // namespace

TEST_CASE("quantize worked example") {
  Eigen::MatrixXd w(1, 3);
  w << 0.5, -1.0, 0.25;
  const QuantizedTensor q = quantize(w, 8, Granularity::per_tensor);
  REQUIRE(q.scales.size() == 1);
  CHECK(q.scales[0] == static_cast<float>(1.0 / 127.0));
  CHECK(q.ints == std::vector<std::int32_t>{64, -127, 32});
}

TEST_CASE("quantize zero tensor") {
  const Eigen::MatrixXd z = Eigen::MatrixXd::Zero(3, 4);
  for (auto g : {Granularity::per_tensor, Granularity::per_channel}) {
    const QuantizedTensor q = quantize(z, 8, g);
    for (float s : q.scales) CHECK(s == 1.0f);
    for (auto i : q.ints) CHECK(i == 0);
    CHECK(dequantize(q) == z);
  }
}

TEST_CASE("quantization error bounds") {
  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const int r = 1 + static_cast<int>(rng.below(9));
    const int c = 1 + static_cast<int>(rng.below(40));
    Eigen::MatrixXd w = random_matrix(r, c, rng.uniform(1e-3, 10.0), rng);
    if (trial % 7 == 0) w.row(0).setZero();
    for (int bits = kMinBits; bits <= kMaxBits; ++bits) {
      for (auto g : {Granularity::per_tensor, Granularity::per_channel}) {
        const QuantizedTensor q = quantize(w, bits, g);
        const Eigen::MatrixXd d = dequantize(q);
        for (int i = 0; i < r; ++i) {
          const double s = q.scales[g == Granularity::per_channel ? static_cast<std::size_t>(i) : 0];
          for (int j = 0; j < c; ++j) {
            CHECK(std::abs(d(i, j) - w(i, j)) <= s / 2 * (1 + 1e-12));
            CHECK(std::abs(q.ints[static_cast<std::size_t>(i * c + j)]) <= q.max_level());
          }
        }
      }
    }
    const Eigen::MatrixXd d16 = fake_quantize(w, 16, Granularity::per_tensor);
    CHECK((d16 - w).cwiseAbs().maxCoeff() <= w.cwiseAbs().maxCoeff() / (2.0 * 32767.0) * (1 + 1e-6));
  }
}

TEST_CASE("quantization rounds half away from zero") {
  Eigen::MatrixXd w(1, 3);
  w << 1.0, 0.5 / 127.0, -0.5 / 127.0;
  const QuantizedTensor q = quantize(w, 8, Granularity::per_tensor);
  CHECK(std::abs(q.ints[1]) <= 1);
  CHECK(q.ints[1] == -q.ints[2]);
}

TEST_CASE("entropy coder round trip on random streams") {
  Rng rng(11);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t n = trial == 0 ? 0 : trial == 1 ? 100000 : static_cast<std::size_t>(rng.below(20000));
    const int bits = 2 + static_cast<int>(rng.below(15));
    const std::int32_t lim = signed_limit(bits);
    std::vector<std::int32_t> s(n);
    for (auto& x : s) x = static_cast<std::int32_t>(rng.below(static_cast<std::uint64_t>(2 * lim + 1))) - lim;
    const auto bytes = entropy_encode(s, -lim, lim);
    std::size_t consumed = 0;
    CHECK(entropy_decode(bytes, -lim, lim, &consumed) == s);
    CHECK(consumed == bytes.size());
    CHECK(entropy_encode(s, -lim, lim) == bytes);
  }
}

TEST_CASE("entropy coder efficiency") {
  Rng rng(12);
  SUBCASE("uniform 8-bit symbols") {
    std::vector<std::int32_t> s(100000);
    for (auto& x : s) x = static_cast<std::int32_t>(rng.below(256));
    const auto bytes = entropy_encode(s, 0, 255);
    CHECK(std::abs(static_cast<double>(bytes.size()) - 1e5) <= 0.02 * 1e5);
    CHECK(entropy_decode(bytes, 0, 255) == s);
  }
  SUBCASE("skewed symbols") {
    std::vector<std::int32_t> s(100000);
    for (auto& x : s) x = rng.uniform() < 0.9 ? 0 : 1 + static_cast<std::int32_t>(rng.below(255));
    const auto bytes = entropy_encode(s, 0, 255);
    const double target = shannon_bytes(s);
    CHECK(std::abs(static_cast<double>(bytes.size()) - target) <= 0.05 * target);
  }
  SUBCASE("out-of-alphabet symbols are rejected") {
    const std::vector<std::int32_t> s{0, 5, 300};
    CHECK_THROWS(entropy_encode(s, 0, 255));
  }
}

TEST_CASE("adaptive model invariants") {
  AdaptiveModel m(-3, 3);
  CHECK(m.size() == 7);
  CHECK(m.total() == 7);
  Rng rng(1);
  for (int i = 0; i < 200000; ++i) {
    m.update(rng.below(3));
    if (i % 997 == 0) {
      std::uint32_t acc = 0;
      for (std::size_t k = 0; k < m.size(); ++k) {
        CHECK(m.cumulative(k) == acc);
        CHECK(m.count(k) >= 1);
        if (m.count(k) > 0) CHECK(m.find(acc) == k);
        acc += m.count(k);
      }
      CHECK(acc == m.total());
    }
  }
}

TEST_CASE("field quantization") {
  Rng rng(3);
  Grid g(9, 7);
  for (auto& v : g.values) v = rng.normal() * 2.0;
  const auto [lo_it, hi_it] = std::minmax_element(g.values.begin(), g.values.end());
  const double range = *hi_it - *lo_it;
  const QuantizedField q = quantize_field(g, 4);
  CHECK(q.lo == *lo_it);
  CHECK(q.hi == *hi_it);
  const Grid d = dequantize_field(q, 9, 7);
  for (std::size_t i = 0; i < g.size(); ++i) {
    CHECK(q.levels[i] >= 0);
    CHECK(q.levels[i] <= 15);
    CHECK(std::abs(d.values[i] - g.values[i]) <= range / 30.0 * (1 + 1e-12));
  }
  CHECK(*std::min_element(d.values.begin(), d.values.end()) == *lo_it);
  CHECK(*std::max_element(d.values.begin(), d.values.end()) == *hi_it);
  const QuantizedField flat = quantize_field(Grid(3, 3, 0.5), 4);
  for (double v : dequantize_field(flat, 3, 3).values) CHECK(v == 0.5);
}

TEST_CASE("container round trip") {
  for (bool geom : {true, false}) {
    const TerrainModel m = synthetic_model(21, geom);
    for (const PackConfig cfg : {PackConfig{}, PackConfig{16, 10, 6, 8}, PackConfig::passthrough(32),
                                 PackConfig::passthrough(64)}) {
      CAPTURE(cfg.b_shape);
      const auto bytes = pack(m, cfg);
      const TerrainModel u = unpack(bytes);
      CHECK(flatten(u) == flatten(quantize_model(m, cfg)));
      CHECK(pack(u, cfg) == bytes);
      CHECK(u.shape.freq.source == m.shape.freq.source);
      const Grid a = reconstruct(u, 20, 18);
      const Grid b = reconstruct(quantize_model(m, cfg), 20, 18);
      CHECK(a.values == b.values);
    }
    CHECK(flatten(unpack(pack(m, PackConfig::passthrough(64)))) == flatten(m));
  }
}

TEST_CASE("quantize_model reports the packed field error") {
  const TerrainModel m = synthetic_model(5);
  const TerrainModel q = quantize_model(m, {});
  const auto& a = m.geometry->field.c_hat.values;
  const auto& b = q.geometry->field.c_hat.values;
  const auto [lo, hi] = std::minmax_element(a.begin(), a.end());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - b[i]) <= (*hi - *lo) / 30.0 * (1 + 1e-12));
}

TEST_CASE("explicit frequency tables survive a round trip") {
  TerrainModel m;
  m.meta = {16, 16, 0.0, 1.0, 1.0};
  m.shape = make_stage(explicit_frequency_table({{1, -1}, {1, 1}, {3, 0}}, {1.5, 0.0, 0.25}, {0, 0, 0}), 4, 1, 30.0);
  Rng rng(2);
  randomize(m.shape.layers, rng);
  const TerrainModel u = unpack(pack(m, PackConfig::passthrough(64)));
  CHECK(u.shape.freq.rows == m.shape.freq.rows);
  CHECK(u.shape.freq.phases == m.shape.freq.phases);
  CHECK(flatten(u) == flatten(m));
}

TEST_CASE("container errors") {
  const auto bytes = pack(synthetic_model(8), {});
  SUBCASE("bad magic") {
    auto b = bytes;
    b[0] = 'X';
    CHECK_THROWS_AS(unpack(b), FormatError);
  }
  SUBCASE("every truncation") {
    for (std::size_t n = 0; n < bytes.size(); ++n)
      CHECK_THROWS_AS(unpack(std::span<const std::uint8_t>(bytes.data(), n)), FormatError);
  }
  SUBCASE("single bit flips") {
    for (std::size_t i = 4; i < bytes.size(); i += 7) {
      auto b = bytes;
      b[i] ^= static_cast<std::uint8_t>(1u << (i % 8));
      CHECK_THROWS_AS(unpack(b), FormatError);
    }
  }
  SUBCASE("trailing garbage") {
    auto b = bytes;
    b.push_back(0);
    CHECK_THROWS_AS(unpack(b), FormatError);
  }
  SUBCASE("untrained model") {
    TerrainModel m = synthetic_model(8);
    m.shape.layers.output.weight.setZero();
    CHECK_THROWS_AS(pack(m), DataError);
  }
  SUBCASE("non-finite parameters") {
    TerrainModel m = synthetic_model(8);
    m.shape.layers.hidden[0].weight(0, 0) = std::nan("");
    CHECK_THROWS_AS(pack(m), NumericError);
  }
  SUBCASE("unsupported widths") {
    CHECK_THROWS_AS(pack(synthetic_model(8), PackConfig{1, 8, 8, 4}), ArgumentError);
    CHECK_THROWS_AS(pack(synthetic_model(8), PackConfig{12, 17, 8, 4}), ArgumentError);
  }
  SUBCASE("missing file") { CHECK_THROWS_AS(load_model("/nonexistent/model.itv"), DataError); }
}

TEST_CASE("golden container bytes") {
  const auto bytes = pack(synthetic_model(2024), {});
  if (std::getenv("ITERRAIN_REGEN_GOLDEN") != nullptr) write_file(golden_path(), bytes);
  REQUIRE(std::filesystem::exists(golden_path()));
  const auto golden = read_file(golden_path());
  CHECK(golden == bytes);
  CHECK(pack(unpack(golden), {}) == golden);
}

TEST_CASE("bits per pixel counts every byte") {
  const TileMeta meta{128, 128, 0.0, 1.0, 1.0};
  CHECK(bits_per_pixel(2048, meta) == doctest::Approx(1.0));
  const auto bytes = pack(synthetic_model(3), {});
  const TerrainModel m = synthetic_model(3);
  CHECK(bits_per_pixel(bytes.size(), m.meta) == doctest::Approx(8.0 * bytes.size() / (40.0 * 36.0)));
}

TEST_CASE("quantization sweep on a small trained model") {
  TrainConfig cfg;
  cfg.shape_iters = 150;
  cfg.geom_iters = 60;
  cfg.width = 32;
  cfg.hidden_layers = 2;
  cfg.lr = 1e-3;
  cfg.decoder_channels = 8;
  const DemTile tile = synth_tile(9, 32, 32, TerrainProfile::bumps);
  const TerrainModel m = fit_tile(tile, cfg).model;
  const auto groups = layer_groups(m);
  CHECK(groups.size() == 3 + 3 + 1);
  const SweepTable t = sensitivity_sweep(m, tile, {16, 8});
  REQUIRE(t.rows.size() == groups.size());
  for (const auto& r : t.rows) CHECK(std::abs(r.delta_db[0]) <= 0.05);
  CHECK(t.find("shape", "output") != nullptr);
  CHECK(t.find("wcf", "decoder") != nullptr);
  CHECK(t.find("shape", "nope") == nullptr);
  const std::string text = t.to_text();
  CHECK(text.rfind("# baseline_psnr_db=", 0) == 0);

  SUBCASE("quantize_group touches one group only") {
    const TerrainModel q = quantize_group(m, {"shape", "hidden1"}, 8);
    CHECK(q.shape.layers.hidden[0].weight == m.shape.layers.hidden[0].weight);
    CHECK(q.shape.layers.hidden[1].weight != m.shape.layers.hidden[1].weight);
    CHECK(q.shape.layers.output.weight == m.shape.layers.output.weight);
    std::vector<double> a(m.geometry->stage.layers.parameter_count()), b(a.size());
    m.geometry->stage.layers.gather(a);
    q.geometry->stage.layers.gather(b);
    CHECK(a == b);
  }
}

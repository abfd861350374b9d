#pragma once

// Shared builders for randomized stages and finite-difference checks.

#include <cmath>
#include <functional>

#include "iterrain/siren.hpp"

namespace fixture {

using namespace iterrain;

// Random band layout, width, depth and omega_0, SIREN-initialized weights
// plus small random biases so no parameter is structurally zero.
inline SirenStage random_stage(std::uint64_t seed, int width = 0) {
  Rng rng(derive_seed(seed, 99));
  FrequencyConfig c;
  c.seed = seed;
  c.low_limit = 3 + static_cast<int>(rng.below(8));
  const int k = static_cast<int>(rng.below(3));
  int edge = c.low_limit;
  c.band_sizes.push_back(4 + static_cast<int>(rng.below(12)));
  for (int i = 0; i < k; ++i) {
    edge += 3 + static_cast<int>(rng.below(8));
    c.band_edges.push_back(edge);
    c.band_sizes.push_back(2 + static_cast<int>(rng.below(6)));
  }
  const int w = width > 0 ? width : 8 << rng.below(3);
  const int hidden = 1 + static_cast<int>(rng.below(3));
  const double omega0 = rng.below(2) ? 30.0 : 150.0;
  SirenStage s = init_trainable(make_stage(build_frequency_table(c), w, hidden, omega0), derive_seed(seed, 7));
  for (auto& l : s.layers.hidden)
    for (auto& b : l.bias) b = rng.uniform(-0.5, 0.5) / omega0;
  s.layers.output.bias(0) = rng.uniform(-0.5, 0.5);
  return s;
}

inline std::vector<double> random_mask(const SirenStage& s, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> m(static_cast<std::size_t>(s.input_size()));
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = s.freq.band_of[i] == 0 ? 1.0 : rng.uniform(0.05, 1.0);
  return m;
}

// Five-point central difference, fourth-order accurate.
inline double fd5(const std::function<double(double)>& f, double x, double h) {
  return (8.0 * (f(x + h) - f(x - h)) - (f(x + 2 * h) - f(x - 2 * h))) / (12.0 * h);
}

inline double vec_rel_err(double ax, double ay, double bx, double by, double floor = 1e-6) {
  return std::hypot(ax - bx, ay - by) / std::max(std::hypot(bx, by), floor);
}

}  // namespace fixture

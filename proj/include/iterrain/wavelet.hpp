#pragma once

#include <array>
#include <vector>

#include "iterrain/common.hpp"

namespace iterrain {

// One level of the undecimated Haar transform. All grids share the input dims.
struct SwtLevel {
  Grid approx;
  Grid detail_h;  // high-pass along x, low-pass along y
  Grid detail_v;  // low-pass along x, high-pass along y
  Grid detail_d;  // high-pass along both
};

// Stationary (a trous) Haar transform with periodic extension. Level l uses
// taps spaced 2^(l-1) apart and runs on the previous level's approximation.
// Taps are [1/2, 1/2] and [1/2, -1/2] per axis, so every level preserves
// energy and maps constants to themselves.
std::vector<SwtLevel> swt2_haar(const Grid& grid, int levels);

constexpr int kFeatureChannels = 7;
constexpr double kFeatureStdFloor = 1e-8;

// Complexity features: |d1_h|, |d1_v|, |d1_d|, |d2_h|, |d2_v|, |d2_d|, |grad r|,
// each z-scored over the tile. Channels whose std is below the floor come
// out as zeros.
struct SwtFeatures {
  std::array<Grid, kFeatureChannels> channels;
  std::array<double, kFeatureChannels> mean{};
  std::array<double, kFeatureChannels> stddev{};

  int width() const { return channels[0].width; }
  int height() const { return channels[0].height; }
};

// The seven channels before z-scoring.
std::array<Grid, kFeatureChannels> complexity_channels(const Grid& residual);

SwtFeatures build_features(const Grid& residual);

}  // namespace iterrain

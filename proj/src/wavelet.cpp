#include "iterrain/wavelet.hpp"

#include <algorithm>
#include <cmath>

#include "iterrain/raster.hpp"

namespace iterrain {

namespace {

// Periodic two-tap filter along x: out[i] = (in[i] + sign * in[i - step]) / 2.
Grid filter_x(const Grid& in, int step, double sign) {
  const int w = in.width;
  Grid out(w, in.height);
  for (int r = 0; r < in.height; ++r) {
    for (int c = 0; c < w; ++c) {
      int prev = (c - step) % w;
      if (prev < 0) prev += w;
      out(c, r) = 0.5 * (in(c, r) + sign * in(prev, r));
    }
  }
  return out;
}

Grid filter_y(const Grid& in, int step, double sign) {
  const int h = in.height;
  Grid out(in.width, h);
  for (int r = 0; r < h; ++r) {
    int prev = (r - step) % h;
    if (prev < 0) prev += h;
    for (int c = 0; c < in.width; ++c) out(c, r) = 0.5 * (in(c, r) + sign * in(c, prev));
  }
  return out;
}

}  // namespace

std::vector<SwtLevel> swt2_haar(const Grid& grid, int levels) {
  if (levels < 1 || levels > 2) throw ArgumentError("swt2_haar supports 1 or 2 levels");
  if (grid.width < 4 || grid.height < 4) throw ArgumentError("swt2_haar needs at least 4x4 nodes");
  std::vector<SwtLevel> out;
  const Grid* current = &grid;
  for (int level = 1; level <= levels; ++level) {
    const int step = 1 << (level - 1);
    const Grid lo_x = filter_x(*current, step, 1.0);
    const Grid hi_x = filter_x(*current, step, -1.0);
    SwtLevel l;
    l.approx = filter_y(lo_x, step, 1.0);
    l.detail_h = filter_y(hi_x, step, 1.0);
    l.detail_v = filter_y(lo_x, step, -1.0);
    l.detail_d = filter_y(hi_x, step, -1.0);
    out.push_back(std::move(l));
    current = &out.back().approx;
  }
  return out;
}

std::array<Grid, kFeatureChannels> complexity_channels(const Grid& residual) {
  const auto levels = swt2_haar(residual, 2);
  std::array<Grid, kFeatureChannels> ch;
  auto absolute = [](Grid g) {
    for (auto& v : g.values) v = std::abs(v);
    return g;
  };
  for (int l = 0; l < 2; ++l) {
    ch[static_cast<std::size_t>(3 * l + 0)] = absolute(levels[static_cast<std::size_t>(l)].detail_h);
    ch[static_cast<std::size_t>(3 * l + 1)] = absolute(levels[static_cast<std::size_t>(l)].detail_v);
    ch[static_cast<std::size_t>(3 * l + 2)] = absolute(levels[static_cast<std::size_t>(l)].detail_d);
  }
  const auto grad = finite_diff_gradients(residual);
  Grid mag(residual.width, residual.height);
  for (std::size_t i = 0; i < mag.size(); ++i)
    mag.values[i] = std::hypot(grad.gx.values[i], grad.gy.values[i]);
  ch[6] = std::move(mag);
  return ch;
}

SwtFeatures build_features(const Grid& residual) {
  SwtFeatures f;
  f.channels = complexity_channels(residual);
  for (std::size_t c = 0; c < kFeatureChannels; ++c) {
    Grid& g = f.channels[c];
    const double n = static_cast<double>(g.size());
    double mean = 0.0;
    for (double v : g.values) mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : g.values) var += (v - mean) * (v - mean);
    const double sd = std::sqrt(var / n);
    f.mean[c] = mean;
    f.stddev[c] = sd;
    // Channels flatter than the std floor carry no information.
    if (sd < kFeatureStdFloor) {
      std::fill(g.values.begin(), g.values.end(), 0.0);
      continue;
    }
    for (auto& v : g.values) v = (v - mean) / sd;
  }
  return f;
}

}  // namespace iterrain

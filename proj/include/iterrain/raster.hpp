#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "iterrain/common.hpp"

namespace iterrain {

// Elevation tile in meters. Georeferencing-free; cell_size is carried along
// but never enters the math.
struct DemTile {
  Grid elevations;
  double z_min = 0.0;
  double z_max = 0.0;
  double cell_size = 1.0;

  int width() const { return elevations.width; }
  int height() const { return elevations.height; }
  bool trainable() const { return z_max > z_min && width() >= 16 && height() >= 16; }
};

// Min-max normalized grid in [0, 1] plus the range it was normalized with.
struct NormalizedTile {
  Grid grid;
  double z_min = 0.0;
  double z_max = 1.0;

  int width() const { return grid.width; }
  int height() const { return grid.height; }
};

// d/dx along columns and d/dy along rows, in normalized units.
struct GradientGrid {
  Grid gx;
  Grid gy;

  int width() const { return gx.width; }
  int height() const { return gx.height; }
};

enum class RasterFormat { raw_f32, ascii_grid };

RasterFormat parse_raster_format(std::string_view name);

// Sidecar for a raw-f32 raster: `<stem>.json` next to the data file.
std::filesystem::path sidecar_path(const std::filesystem::path& raster);

// Reads a tile. Tiles narrower or shorter than `min_dim` are rejected; the
// default is the smallest size the trainer accepts.
DemTile load_tile(const std::filesystem::path& path, RasterFormat format, int min_dim = 16);
void save_tile(const std::filesystem::path& path, const DemTile& tile,
               RasterFormat format = RasterFormat::raw_f32);

// Computes z_min/z_max from the samples; rejects non-finite cells.
DemTile make_tile(Grid elevations, double cell_size = 1.0);

NormalizedTile normalize(const DemTile& tile);
DemTile denormalize(const NormalizedTile& tile, double cell_size = 1.0);

// Separable Gaussian, radius ceil(3 sigma), reflect padding.
NormalizedTile gaussian_smooth(const NormalizedTile& tile, double sigma);
Grid gaussian_smooth(const Grid& grid, double sigma);

// Corner-aligned bilinear resampling: node i sits at i / (n - 1).
NormalizedTile resample_bilinear(const NormalizedTile& tile, int out_w, int out_h);
Grid resample_bilinear(const Grid& grid, int out_w, int out_h);

// Central differences inside, one-sided at the borders, spacing 1/(n-1).
GradientGrid finite_diff_gradients(const Grid& grid);
inline GradientGrid finite_diff_gradients(const NormalizedTile& tile) {
  return finite_diff_gradients(tile.grid);
}

enum class TerrainProfile { bumps, ridge, flat_plus_cliff, fractal };

TerrainProfile parse_profile(std::string_view name);
std::string_view profile_name(TerrainProfile profile);

// Power-law exponent of the `fractal` profile's spectrum: P(k) ~ k^-beta.
constexpr double kFractalSpectralExponent = 2.4;

// Deterministic synthetic terrain for desk-scale experiments.
DemTile synth_tile(std::uint64_t seed, int width, int height, TerrainProfile profile);

}  // namespace iterrain

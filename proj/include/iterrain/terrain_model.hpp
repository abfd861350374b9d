#pragma once

#include <optional>
#include <span>
#include <vector>

#include "iterrain/common.hpp"
#include "iterrain/raster.hpp"
#include "iterrain/siren.hpp"
#include "iterrain/wcf.hpp"

namespace iterrain {

struct TileMeta {
  int width = 0;
  int height = 0;
  double z_min = 0.0;
  double z_max = 1.0;
  double cell_size = 1.0;

  double z_range() const { return z_max - z_min; }
};

struct GeometryModel {
  SirenStage stage;
  WcfDecoder decoder;
  ThresholdSet thresholds;
  ComplexityField field;
  double residual_scale = 1.0;  // rho: the stage fits r / rho
  bool masked = true;           // false: every neuron gain is 1 (ablation baseline)
};

// z(xy) = (shape(xy) + rho * geom(xy)) * (z_max - z_min) + z_min.
struct TerrainModel {
  TileMeta meta;
  SirenStage shape;
  std::optional<GeometryModel> geometry;
};

// Per-neuron gains of the geometry stage at each coordinate (empty if unmasked).
Eigen::MatrixXd geometry_masks(const GeometryModel& geom, std::span<const Vec2> coords);

// Normalized elevation and its gradient per normalized coordinate. The
// geometry masks are treated as locally constant.
std::vector<EvalResult> eval_normalized(const TerrainModel& model, std::span<const Vec2> coords, EvalMode mode);

// Corner-aligned node coordinates of a w x h grid, row-major.
std::vector<Vec2> grid_coords(int w, int h);

// Stage outputs on a corner-aligned grid.
Grid stage_grid(const SirenStage& stage, int w, int h);
Grid geometry_grid(const GeometryModel& geom, int w, int h);  // in units of r / rho

// Full normalized reconstruction at arbitrary resolution.
Grid reconstruct(const TerrainModel& model, int w, int h);
GradientGrid reconstruct_gradients(const TerrainModel& model, int w, int h);
GradientGrid stage_gradients(const SirenStage& stage, int w, int h);

DemTile reconstruct_tile(const TerrainModel& model, int w, int h);

}  // namespace iterrain

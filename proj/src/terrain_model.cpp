#include "iterrain/terrain_model.hpp"

namespace iterrain {

Eigen::MatrixXd geometry_masks(const GeometryModel& geom, std::span<const Vec2> coords) {
  if (!geom.masked) return {};
  return neuron_masks(geom.stage.freq, geom.field, geom.thresholds, coords);
}

std::vector<EvalResult> eval_normalized(const TerrainModel& model, std::span<const Vec2> coords, EvalMode mode) {
  auto out = batch_eval(model.shape, coords, mode);
  if (!model.geometry) return out;
  const auto& geom = *model.geometry;
  const auto g = batch_eval(geom.stage, coords, geometry_masks(geom, coords), mode);
  const double rho = geom.residual_scale;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i].value += rho * g[i].value;
    out[i].grad[0] += rho * g[i].grad[0];
    out[i].grad[1] += rho * g[i].grad[1];
  }
  return out;
}

std::vector<Vec2> grid_coords(int w, int h) {
  std::vector<Vec2> c;
  c.reserve(static_cast<std::size_t>(w) * static_cast<std::size_t>(h));
  for (int r = 0; r < h; ++r)
    for (int col = 0; col < w; ++col) c.push_back({node_coord(col, w), node_coord(r, h)});
  return c;
}

namespace {

Grid values_to_grid(const std::vector<EvalResult>& res, int w, int h) {
  Grid g(w, h);
  for (std::size_t i = 0; i < res.size(); ++i) g.values[i] = res[i].value;
  return g;
}

GradientGrid grads_to_grid(const std::vector<EvalResult>& res, int w, int h) {
  GradientGrid g{Grid(w, h), Grid(w, h)};
  for (std::size_t i = 0; i < res.size(); ++i) {
    g.gx.values[i] = res[i].grad[0];
    g.gy.values[i] = res[i].grad[1];
  }
  return g;
}

void check_dims(int w, int h) {
  if (w < 2 || h < 2) throw ArgumentError("output grid must be at least 2x2");
}

}  // namespace

Grid stage_grid(const SirenStage& stage, int w, int h) {
  check_dims(w, h);
  return values_to_grid(batch_eval(stage, grid_coords(w, h), EvalMode::value), w, h);
}

Grid geometry_grid(const GeometryModel& geom, int w, int h) {
  check_dims(w, h);
  const auto coords = grid_coords(w, h);
  return values_to_grid(batch_eval(geom.stage, coords, geometry_masks(geom, coords), EvalMode::value), w, h);
}

Grid reconstruct(const TerrainModel& model, int w, int h) {
  check_dims(w, h);
  return values_to_grid(eval_normalized(model, grid_coords(w, h), EvalMode::value), w, h);
}

GradientGrid reconstruct_gradients(const TerrainModel& model, int w, int h) {
  check_dims(w, h);
  return grads_to_grid(eval_normalized(model, grid_coords(w, h), EvalMode::value_grad), w, h);
}

GradientGrid stage_gradients(const SirenStage& stage, int w, int h) {
  check_dims(w, h);
  return grads_to_grid(batch_eval(stage, grid_coords(w, h), EvalMode::value_grad), w, h);
}

DemTile reconstruct_tile(const TerrainModel& model, int w, int h) {
  NormalizedTile t{reconstruct(model, w, h), model.meta.z_min, model.meta.z_max};
  // Same ground extent at a different node count.
  const double cell = model.meta.width > 1 && w > 1
                          ? model.meta.cell_size * (model.meta.width - 1) / static_cast<double>(w - 1)
                          : model.meta.cell_size;
  return denormalize(t, cell);
}

}  // namespace iterrain

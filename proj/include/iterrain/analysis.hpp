#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "iterrain/common.hpp"
#include "iterrain/siren.hpp"
#include "iterrain/terrain_model.hpp"

namespace iterrain {

// Rasters from the analytical derivatives of the shape stage, in normalized
// elevation per normalized coordinate. Aspect is counterclockwise from +x
// in (-pi, pi].
struct TopoRasters {
  Grid slope;
  Grid aspect;
  Grid curvature;
};

double slope_angle(double gx, double gy);
double aspect_angle(double gx, double gy);
double mean_curvature(double gx, double gy, double hxx, double hxy, double hyy);

TopoRasters topo_rasters(const SirenStage& stage, int out_w, int out_h);
inline TopoRasters topo_rasters(const TerrainModel& model, int out_w, int out_h) {
  return topo_rasters(model.shape, out_w, out_h);
}

enum class CriticalKind { minimum, maximum, saddle, degenerate };
std::string_view kind_name(CriticalKind k);

struct CriticalPoint {
  Vec2 xy{};
  double value = 0.0;
  CriticalKind kind = CriticalKind::degenerate;
  double grad_norm = 0.0;
  std::array<double, 2> eigenvalues{};  // ascending
  std::array<Vec2, 2> eigenvectors{};   // unit, matching eigenvalues
  int iterations = 0;                   // Newton steps taken
};

struct CriticalConfig {
  int seed_stride = 4;  // grid cells between Newton starts
  double tol_root = 1e-6;
  int max_iters = 50;
  double dedup_radius = 1e-4;
  double tol_degenerate = 1e-8;
  double keep_margin = 0.01;  // roots outside [-m, 1 + m]^2 are dropped
};

// Eigen-decomposition of a symmetric 2x2 Hessian and the resulting class.
CriticalPoint classify(Vec2 xy, const EvalResult& r, double tol_degenerate);

// Newton iteration from one start; nullopt when the start is abandoned.
std::optional<CriticalPoint> newton_root(const SirenStage& stage, Vec2 start, const CriticalConfig& cfg = {});

// Starts on every seed_stride-th node of a grid_w x grid_h lattice.
std::vector<CriticalPoint> find_critical_points(const SirenStage& stage, int grid_w, int grid_h,
                                                const CriticalConfig& cfg = {});
inline std::vector<CriticalPoint> find_critical_points(const TerrainModel& model, const CriticalConfig& cfg = {}) {
  return find_critical_points(model.shape, model.meta.width, model.meta.height, cfg);
}

enum class FlowDirection { ascending, descending };
enum class Terminus { critical_point, boundary, unresolved };

struct Separatrix {
  CriticalPoint origin;
  FlowDirection direction = FlowDirection::ascending;
  std::vector<Vec2> polyline;  // starts at the saddle
  Terminus terminus = Terminus::unresolved;
  std::optional<CriticalPoint> end;  // set when terminus == critical_point
};

// Four RK4 traces of the normalized gradient flow per saddle; traces stop
// within 2 * step of another critical point or on leaving the unit square.
std::vector<Separatrix> trace_separatrices(const SirenStage& stage, const std::vector<CriticalPoint>& critical,
                                           double step, int max_steps);

// JSON lines: one record per critical point, then one per separatrix.
std::string critical_net_records(const std::vector<CriticalPoint>& points, const std::vector<Separatrix>& lines);

// psi = sin(2 pi x) sin(2 pi y) as an exact two-neuron stage without hidden layers.
SirenStage product_of_sines_stage();

}  // namespace iterrain

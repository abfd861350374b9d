#include "iterrain/analysis.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

namespace iterrain {

namespace {

bool inside_unit(Vec2 p) { return p[0] >= 0.0 && p[0] <= 1.0 && p[1] >= 0.0 && p[1] <= 1.0; }

bool inside_margin(Vec2 p, double m) {
  return p[0] >= -m && p[0] <= 1.0 + m && p[1] >= -m && p[1] <= 1.0 + m;
}

double dist(Vec2 a, Vec2 b) { return std::hypot(a[0] - b[0], a[1] - b[1]); }

// Newton step -H^{-1} g, with an optional Levenberg shift mu.
std::optional<Vec2> newton_step(const Hessian2& h, Vec2 g, double mu) {
  const double a = h[0][0] + mu;
  const double b = h[0][1];
  const double d = h[1][1] + mu;
  const double det = a * d - b * b;
  const double scale = std::max({std::abs(a), std::abs(b), std::abs(d), 1e-300});
  if (!std::isfinite(det) || std::abs(det) <= 1e-14 * scale * scale) return std::nullopt;
  return Vec2{-(d * g[0] - b * g[1]) / det, -(-b * g[0] + a * g[1]) / det};
}

nlohmann::json point_json(Vec2 p) { return nlohmann::json::array({p[0], p[1]}); }

}  // namespace

double slope_angle(double gx, double gy) { return std::atan(std::hypot(gx, gy)); }

// Range (-pi, pi]; a signed zero in gy must not flip due west to -pi.
double aspect_angle(double gx, double gy) {
  const double a = std::atan2(gy, gx);
  return a == -kPi ? kPi : a;
}

double mean_curvature(double gx, double gy, double hxx, double hxy, double hyy) {
  const double q = 1.0 + gx * gx + gy * gy;
  return ((1.0 + gy * gy) * hxx - 2.0 * gx * gy * hxy + (1.0 + gx * gx) * hyy) / (2.0 * q * std::sqrt(q));
}

TopoRasters topo_rasters(const SirenStage& stage, int out_w, int out_h) {
  if (out_w < 2 || out_h < 2) throw ArgumentError("raster dimensions must be at least 2");
  const auto coords = grid_coords(out_w, out_h);
  const auto r = batch_eval_hessian(stage, coords);
  TopoRasters t{Grid(out_w, out_h), Grid(out_w, out_h), Grid(out_w, out_h)};
  for (std::size_t i = 0; i < r.size(); ++i) {
    const auto& e = r[i];
    const auto& h = *e.hessian;
    t.slope.values[i] = slope_angle(e.grad[0], e.grad[1]);
    t.aspect.values[i] = aspect_angle(e.grad[0], e.grad[1]);
    t.curvature.values[i] = mean_curvature(e.grad[0], e.grad[1], h[0][0], h[0][1], h[1][1]);
  }
  return t;
}

std::string_view kind_name(CriticalKind k) {
  switch (k) {
    case CriticalKind::minimum: return "minimum";
    case CriticalKind::maximum: return "maximum";
    case CriticalKind::saddle: return "saddle";
    case CriticalKind::degenerate: return "degenerate";
  }
  return "degenerate";
}

CriticalPoint classify(Vec2 xy, const EvalResult& r, double tol_degenerate) {
  if (!r.hessian) throw ArgumentError("classify needs a Hessian");
  const auto& h = *r.hessian;
  Eigen::Matrix2d m;
  m << h[0][0], h[0][1], h[1][0], h[1][1];
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(m);
  CriticalPoint c;
  c.xy = xy;
  c.value = r.value;
  c.grad_norm = std::hypot(r.grad[0], r.grad[1]);
  for (int i = 0; i < 2; ++i) {
    c.eigenvalues[static_cast<std::size_t>(i)] = es.eigenvalues()(i);
    c.eigenvectors[static_cast<std::size_t>(i)] = {es.eigenvectors()(0, i), es.eigenvectors()(1, i)};
  }
  const double l0 = c.eigenvalues[0];
  const double l1 = c.eigenvalues[1];
  if (std::abs(l0) < tol_degenerate || std::abs(l1) < tol_degenerate) {
    c.kind = CriticalKind::degenerate;
  } else if (l0 > 0.0) {
    c.kind = CriticalKind::minimum;
  } else if (l1 < 0.0) {
    c.kind = CriticalKind::maximum;
  } else {
    c.kind = CriticalKind::saddle;
  }
  return c;
}

std::optional<CriticalPoint> newton_root(const SirenStage& stage, Vec2 start, const CriticalConfig& cfg) {
  Vec2 x = start;
  bool damped_used = false;
  for (int it = 0; it <= cfg.max_iters; ++it) {
    if (!inside_margin(x, kDomainMargin)) return std::nullopt;
    const EvalResult r = eval_with_hessian(stage, x);
    if (!std::isfinite(r.grad[0]) || !std::isfinite(r.grad[1])) return std::nullopt;
    if (std::hypot(r.grad[0], r.grad[1]) < cfg.tol_root) {
      if (!inside_margin(x, cfg.keep_margin)) return std::nullopt;
      CriticalPoint c = classify(x, r, cfg.tol_degenerate);
      c.iterations = it;
      return c;
    }
    if (it == cfg.max_iters) break;
    auto step = newton_step(*r.hessian, r.grad, 0.0);
    if (!step) {
      if (damped_used) return std::nullopt;
      damped_used = true;
      const auto& h = *r.hessian;
      const double mu = 1e-3 * (std::abs(h[0][0]) + std::abs(h[0][1]) + std::abs(h[1][1])) + 1e-12;
      step = newton_step(h, r.grad, mu);
      if (!step) return std::nullopt;
    }
    x = {x[0] + (*step)[0], x[1] + (*step)[1]};
  }
  return std::nullopt;
}

std::vector<CriticalPoint> find_critical_points(const SirenStage& stage, int grid_w, int grid_h,
                                                const CriticalConfig& cfg) {
  if (grid_w < 2 || grid_h < 2) throw ArgumentError("seed lattice needs at least 2 x 2 nodes");
  if (cfg.seed_stride < 1 || cfg.max_iters < 0 || !(cfg.tol_root > 0.0))
    throw ArgumentError("bad critical point configuration");
  std::vector<CriticalPoint> found;
  auto axis = [&](int n) {
    std::vector<int> idx;
    for (int i = 0; i < n; i += cfg.seed_stride) idx.push_back(i);
    if (idx.back() != n - 1) idx.push_back(n - 1);
    return idx;
  };
  for (int row : axis(grid_h)) {
    for (int col : axis(grid_w)) {
      const auto c = newton_root(stage, {node_coord(col, grid_w), node_coord(row, grid_h)}, cfg);
      if (!c) continue;
      const bool dup = std::any_of(found.begin(), found.end(),
                                   [&](const CriticalPoint& o) { return dist(o.xy, c->xy) < cfg.dedup_radius; });
      if (!dup) found.push_back(*c);
    }
  }
  std::sort(found.begin(), found.end(), [](const CriticalPoint& a, const CriticalPoint& b) {
    return a.xy[1] != b.xy[1] ? a.xy[1] < b.xy[1] : a.xy[0] < b.xy[0];
  });
  return found;
}

std::vector<Separatrix> trace_separatrices(const SirenStage& stage, const std::vector<CriticalPoint>& critical,
                                           double step, int max_steps) {
  if (!(step > 0.0) || !std::isfinite(step)) throw ArgumentError("separatrix step must be positive");
  if (max_steps < 1) throw ArgumentError("max_steps must be positive");

  struct Trace {
    Separatrix s;
    std::size_t origin_index;
    double sign;
    Vec2 x;
    bool active = true;
  };
  std::vector<Trace> traces;
  for (std::size_t i = 0; i < critical.size(); ++i) {
    const auto& c = critical[i];
    if (c.kind != CriticalKind::saddle) continue;
    // Eigenvalues are ascending: index 1 is positive (ascent), index 0 negative.
    for (auto [dir, sign, vec] : {std::tuple{FlowDirection::ascending, 1.0, c.eigenvectors[1]},
                                  std::tuple{FlowDirection::descending, -1.0, c.eigenvectors[0]}}) {
      for (double side : {1.0, -1.0}) {
        Trace t;
        t.s.origin = c;
        t.s.direction = dir;
        t.s.polyline.push_back(c.xy);
        t.origin_index = i;
        t.sign = sign;
        t.x = {c.xy[0] + side * step * vec[0], c.xy[1] + side * step * vec[1]};
        traces.push_back(std::move(t));
      }
    }
  }

  // Returns false when the trace ended at this vertex.
  auto arrive = [&](Trace& t) {
    if (!inside_unit(t.x)) {
      t.s.terminus = Terminus::boundary;
      return false;
    }
    t.s.polyline.push_back(t.x);
    for (std::size_t j = 0; j < critical.size(); ++j) {
      if (j == t.origin_index) continue;
      if (dist(critical[j].xy, t.x) < 2.0 * step) {
        t.s.terminus = Terminus::critical_point;
        t.s.end = critical[j];
        return false;
      }
    }
    return true;
  };
  for (auto& t : traces) t.active = arrive(t);

  std::vector<Vec2> pts;
  std::vector<std::size_t> idx;
  auto direction_field = [&](const std::vector<Vec2>& at, std::vector<Vec2>& out, std::vector<bool>& stalled) {
    const auto r = batch_eval(stage, at, EvalMode::value_grad);
    out.resize(at.size());
    for (std::size_t k = 0; k < at.size(); ++k) {
      const double n = std::hypot(r[k].grad[0], r[k].grad[1]);
      if (!(n > 1e-14)) {
        stalled[k] = true;
        out[k] = {0.0, 0.0};
        continue;
      }
      const double s = traces[idx[k]].sign / n;
      out[k] = {s * r[k].grad[0], s * r[k].grad[1]};
    }
  };

  for (int n = 0; n < max_steps; ++n) {
    idx.clear();
    pts.clear();
    for (std::size_t i = 0; i < traces.size(); ++i) {
      if (!traces[i].active) continue;
      idx.push_back(i);
      pts.push_back(traces[i].x);
    }
    if (idx.empty()) break;
    std::vector<bool> stalled(idx.size(), false);
    std::array<std::vector<Vec2>, 4> k;
    std::vector<Vec2> probe(idx.size());
    auto offset = [&](const std::vector<Vec2>& d, double h) {
      for (std::size_t j = 0; j < idx.size(); ++j) {
        probe[j] = {pts[j][0] + h * d[j][0], pts[j][1] + h * d[j][1]};
        // Stay within the evaluable domain; the vertex check handles exits.
        probe[j][0] = std::clamp(probe[j][0], -kDomainMargin, 1.0 + kDomainMargin);
        probe[j][1] = std::clamp(probe[j][1], -kDomainMargin, 1.0 + kDomainMargin);
      }
    };
    direction_field(pts, k[0], stalled);
    offset(k[0], 0.5 * step);
    direction_field(probe, k[1], stalled);
    offset(k[1], 0.5 * step);
    direction_field(probe, k[2], stalled);
    offset(k[2], step);
    direction_field(probe, k[3], stalled);
    for (std::size_t j = 0; j < idx.size(); ++j) {
      Trace& t = traces[idx[j]];
      if (stalled[j]) {
        t.active = false;
        continue;
      }
      for (int a = 0; a < 2; ++a) {
        const auto ua = static_cast<std::size_t>(a);
        t.x[ua] = pts[j][ua] + step / 6.0 * (k[0][j][ua] + 2.0 * k[1][j][ua] + 2.0 * k[2][j][ua] + k[3][j][ua]);
      }
      t.active = arrive(t);
    }
  }

  std::vector<Separatrix> out;
  out.reserve(traces.size());
  for (auto& t : traces) out.push_back(std::move(t.s));
  return out;
}

std::string critical_net_records(const std::vector<CriticalPoint>& points, const std::vector<Separatrix>& lines) {
  std::string out;
  for (const auto& c : points) {
    nlohmann::json j;
    j["record"] = "critical_point";
    j["kind"] = kind_name(c.kind);
    j["xy"] = point_json(c.xy);
    j["value"] = c.value;
    j["eigenvalues"] = nlohmann::json::array({c.eigenvalues[0], c.eigenvalues[1]});
    j["grad_norm"] = c.grad_norm;
    out += j.dump() + '\n';
  }
  for (const auto& s : lines) {
    nlohmann::json j;
    j["record"] = "separatrix";
    j["direction"] = s.direction == FlowDirection::ascending ? "ascending" : "descending";
    j["origin"] = point_json(s.origin.xy);
    switch (s.terminus) {
      case Terminus::critical_point:
        j["terminus"] = {{"kind", kind_name(s.end->kind)}, {"xy", point_json(s.end->xy)}};
        break;
      case Terminus::boundary: j["terminus"] = "boundary"; break;
      case Terminus::unresolved: j["terminus"] = "unresolved"; break;
    }
    auto poly = nlohmann::json::array();
    for (const auto& p : s.polyline) poly.push_back(point_json(p));
    j["polyline"] = std::move(poly);
    out += j.dump() + '\n';
  }
  return out;
}

SirenStage product_of_sines_stage() {
  // sin(a) sin(b) = (cos(a - b) - cos(a + b)) / 2, and cos(t) = sin(t + pi/2).
  FrequencyTable t = explicit_frequency_table({{1, -1}, {1, 1}}, {kPi / 2.0, kPi / 2.0}, {0, 0});
  SirenStage s = make_stage(std::move(t), 0, 0, 1.0);
  s.layers.output.weight << 0.5, -0.5;
  return s;
}

}  // namespace iterrain

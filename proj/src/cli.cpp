#include "iterrain/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <sstream>

#include <CLI11.hpp>

#include "iterrain/analysis.hpp"
#include "iterrain/container.hpp"
#include "iterrain/metrics.hpp"
#include "iterrain/raster.hpp"
#include "iterrain/sensitivity.hpp"
#include "iterrain/trainer.hpp"

namespace iterrain::cli {

namespace {

using Clock = std::chrono::steady_clock;

struct Streams {
  std::ostream& out;
  std::ostream& err;
};

// Writes to the named file, or to `fallback` when the name is empty or "-".
void emit(const std::string& path, const std::string& text, std::ostream& fallback) {
  if (path.empty() || path == "-") {
    fallback << text;
    return;
  }
  std::ofstream f(path);
  if (!f) throw DataError("cannot write " + path);
  f << text;
  if (!f) throw DataError("write failed for " + path);
}

std::string number(double v) {
  std::ostringstream s;
  s << std::setprecision(17) << v;
  return s.str();
}

// ---------------------------------------------------------------------------

struct GenArgs {
  std::string profile = "bumps";
  int size = 128;
  int width = 0;
  int height = 0;
  std::uint64_t seed = 1;
  std::string output;
  std::string format = "raw";
};

void add_gen(CLI::App& app, GenArgs& a, std::function<void()>& action, Streams& io) {
  auto* c = app.add_subcommand("gen", "Write a synthetic DEM tile");
  c->add_option("--profile", a.profile, "bumps | ridge | flat-plus-cliff | fractal");
  c->add_option("--size", a.size, "Tile width and height in cells");
  c->add_option("--width", a.width, "Width override (0 = --size)");
  c->add_option("--height", a.height, "Height override (0 = --size)");
  c->add_option("--seed", a.seed, "Generator seed");
  c->add_option("-o,--output", a.output, "Output raster")->required();
  c->add_option("--format", a.format, "raw | ascii");
  c->callback([&] {
    action = [&] {
      const int w = a.width > 0 ? a.width : a.size;
      const int h = a.height > 0 ? a.height : a.size;
      const DemTile t = synth_tile(a.seed, w, h, parse_profile(a.profile));
      save_tile(a.output, t, parse_raster_format(a.format));
      io.out << "wrote=" << a.output << "\nwidth=" << w << "\nheight=" << h << "\nz_min=" << number(t.z_min)
             << "\nz_max=" << number(t.z_max) << '\n';
    };
  });
}

// ---------------------------------------------------------------------------

struct FitArgs {
  std::string input;
  std::string format = "raw";
  std::string output;
  std::string report;
  TrainConfig cfg;
  bool no_masks = false;
  bool quiet = false;
};

void add_fit(CLI::App& app, FitArgs& a, std::function<void()>& action, Streams& io) {
  auto* c = app.add_subcommand("fit", "Train a model on a DEM tile");
  auto& t = a.cfg;
  c->add_option("-i,--input", a.input, "Input raster")->required();
  c->add_option("--format", a.format, "raw | ascii");
  c->add_option("-o,--output", a.output, "Model file (float32 container)")->required();
  c->add_option("--report", a.report, "Also write the fidelity report here");
  c->add_option("--shape-iters", t.shape_iters, "Shape stage iterations");
  c->add_option("--geom-iters", t.geom_iters, "Geometry stage iterations (0 skips the stage)");
  c->add_option("--lr", t.lr, "Adam learning rate");
  c->add_option("--lambda-grad", t.lambda_grad, "Gradient-matching weight");
  c->add_option("--grad-samples", t.grad_samples, "Gradient-matching samples per iteration");
  c->add_option("--shape-frac", t.shape_subsample_frac, "Shape MSE sample fraction");
  c->add_option("--geom-frac", t.geom_sample_frac, "Geometry sample fraction (>= 1: full grid)");
  c->add_option("--alpha", t.alpha, "Complexity-weighted share of geometry samples");
  c->add_option("--eps-s", t.eps_s, "Sampling floor");
  c->add_option("--sigma", t.sigma_smooth, "Shape-target Gaussian sigma in cells");
  c->add_option("--omega0-shape", t.omega0_shape, "Shape stage omega_0");
  c->add_option("--omega0-geom", t.omega0_geom, "Geometry stage omega_0");
  c->add_option("--width", t.width, "Hidden width");
  c->add_option("--hidden-layers", t.hidden_layers, "Hidden layer count");
  c->add_option("--decoder-channels", t.decoder_channels, "WCF decoder hidden channels");
  c->add_flag("--no-masks", a.no_masks, "Train the geometry stage without WCF masks");
  c->add_option("--init-seed", t.init_seed, "Seed for frequency tables and weights");
  c->add_option("--sample-seed", t.sample_seed, "Seed for training batches");
  c->add_option("--log-every", t.log_every, "Iterations between log lines");
  c->add_flag("-q,--quiet", a.quiet, "Suppress training logs");
  c->callback([&] {
    action = [&] {
      TrainConfig cfg = a.cfg;
      cfg.use_masks = !a.no_masks;
      if (!a.quiet) cfg.log = [&](const LogRecord& r) { io.err << format_log_record(r) << '\n'; };
      const DemTile tile = load_tile(a.input, parse_raster_format(a.format));
      const FitResult r = fit_tile(tile, cfg);
      save_model(a.output, r.model, PackConfig::passthrough(32));
      const std::string text = r.report.to_text();
      io.out << text;
      if (!a.report.empty()) emit(a.report, text, io.out);
    };
  });
}

// ---------------------------------------------------------------------------

struct PackArgs {
  std::string input;
  std::string output;
  PackConfig bits;
  std::string truth;
  std::string truth_format = "raw";
};

void add_pack(CLI::App& app, PackArgs& a, std::function<void()>& action, Streams& io) {
  auto* c = app.add_subcommand("pack", "Quantize and entropy-code a model");
  c->add_option("-i,--input", a.input, "Model file")->required();
  c->add_option("-o,--output", a.output, "Container output")->required();
  c->add_option("--b-shape", a.bits.b_shape, "Shape stage bits (2..16, or 32/64 for floats)");
  c->add_option("--b-geom", a.bits.b_geom, "Geometry stage bits");
  c->add_option("--b-wcf", a.bits.b_wcf, "WCF decoder bits");
  c->add_option("--b-field", a.bits.b_field, "Complexity field bits");
  c->add_option("--truth", a.truth, "Optional truth raster for the PSNR change");
  c->add_option("--truth-format", a.truth_format, "raw | ascii");
  c->callback([&] {
    action = [&] {
      const TerrainModel m = load_model(a.input);
      const auto bytes = pack(m, a.bits);
      write_file(a.output, bytes);
      io.out << "bytes=" << bytes.size() << "\nbpp=" << number(bits_per_pixel(bytes.size(), m.meta)) << '\n';
      if (!a.truth.empty()) {
        const DemTile truth = load_tile(a.truth, parse_raster_format(a.truth_format), 2);
        const Grid norm = normalize(truth).grid;
        const double before = psnr(reconstruct(m, truth.width(), truth.height()), norm);
        const double after = psnr(reconstruct(unpack(bytes), truth.width(), truth.height()), norm);
        io.out << "psnr_float_db=" << format_psnr(before) << "\npsnr_packed_db=" << format_psnr(after)
               << "\ndelta_psnr_db=" << number(after - before) << '\n';
      }
    };
  });
}

struct UnpackArgs {
  std::string input;
  std::string output;
};

void add_unpack(CLI::App& app, UnpackArgs& a, std::function<void()>& action, Streams& io) {
  auto* c = app.add_subcommand("unpack", "Decode a container into a float64 model file");
  c->add_option("-i,--input", a.input, "Container")->required();
  c->add_option("-o,--output", a.output, "Model output")->required();
  c->callback([&] {
    action = [&] {
      const TerrainModel m = load_model(a.input);
      save_model(a.output, m, PackConfig::passthrough(64));
      io.out << "wrote=" << a.output << "\nwidth=" << m.meta.width << "\nheight=" << m.meta.height
             << "\ngeometry=" << (m.geometry ? 1 : 0) << '\n';
    };
  });
}

// ---------------------------------------------------------------------------

std::vector<Vec2> read_coords(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::vector<Vec2> coords;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream s(line);
    Vec2 p{};
    std::string extra;
    if (!(s >> p[0] >> p[1]) || (s >> extra))
      throw DataError("malformed coordinate at line " + std::to_string(line_no));
    coords.push_back(p);
  }
  return coords;
}

struct QueryArgs {
  std::string model;
  std::string coords;
  std::string output;
};

void add_query(CLI::App& app, QueryArgs& a, std::function<void()>& action, Streams& io) {
  auto* c = app.add_subcommand("query", "Evaluate elevation and gradient at continuous coordinates");
  c->add_option("-m,--model", a.model, "Model file or container")->required();
  c->add_option("-c,--coords", a.coords, "Text file, one `x y` pair in [0,1] per line")->required();
  c->add_option("-o,--output", a.output, "Output file (default stdout)");
  c->callback([&] {
    action = [&] {
      const TerrainModel m = load_model(a.model);
      const auto coords = read_coords(a.coords);
      std::vector<Vec2> ok;
      std::vector<std::size_t> ok_index;
      for (std::size_t i = 0; i < coords.size(); ++i) {
        const auto& p = coords[i];
        if (std::isfinite(p[0]) && std::isfinite(p[1]) && p[0] >= 0.0 && p[0] <= 1.0 && p[1] >= 0.0 && p[1] <= 1.0) {
          ok.push_back(p);
          ok_index.push_back(i);
        }
      }
      const auto t0 = Clock::now();
      std::vector<EvalResult> r;
      if (!ok.empty()) r = eval_normalized(m, ok, EvalMode::value_grad);
      const double secs = std::chrono::duration<double>(Clock::now() - t0).count();

      const double range = m.meta.z_range();
      const double ex = m.meta.width > 1 ? (m.meta.width - 1) * m.meta.cell_size : 1.0;
      const double ey = m.meta.height > 1 ? (m.meta.height - 1) * m.meta.cell_size : 1.0;
      std::ostringstream s;
      s << std::setprecision(10);
      std::size_t k = 0;
      for (std::size_t i = 0; i < coords.size(); ++i) {
        s << coords[i][0] << ' ' << coords[i][1];
        if (k < ok_index.size() && ok_index[k] == i) {
          const auto& e = r[k++];
          s << ' ' << e.value * range + m.meta.z_min << ' ' << e.grad[0] * range / ex << ' '
            << e.grad[1] * range / ey << '\n';
        } else {
          s << " error=domain\n";
        }
      }
      emit(a.output, s.str(), io.out);
      io.err << "points=" << ok.size() << " seconds=" << secs
             << " points_per_second=" << (secs > 0 ? static_cast<double>(ok.size()) / secs : 0.0) << '\n';
    };
  });
}

// ---------------------------------------------------------------------------

struct RasterArgs {
  std::string model;
  std::string output;
  std::string format = "raw";
  std::string product = "elevation";
  int size = 0;
  int width = 0;
  int height = 0;
};

void add_raster(CLI::App& app, RasterArgs& a, std::function<void()>& action, Streams& io) {
  auto* c = app.add_subcommand("raster", "Reconstruct a raster at any resolution");
  c->add_option("-m,--model", a.model, "Model file or container")->required();
  c->add_option("-o,--output", a.output, "Output raster")->required();
  c->add_option("--format", a.format, "raw | ascii");
  c->add_option("--product", a.product, "elevation | slope | aspect | curvature");
  c->add_option("--size", a.size, "Output width and height (0 = training size)");
  c->add_option("--width", a.width, "Width override");
  c->add_option("--height", a.height, "Height override");
  c->callback([&] {
    action = [&] {
      const TerrainModel m = load_model(a.model);
      const int w = a.width > 0 ? a.width : (a.size > 0 ? a.size : m.meta.width);
      const int h = a.height > 0 ? a.height : (a.size > 0 ? a.size : m.meta.height);
      if (w < 2 || h < 2) throw ArgumentError("raster dimensions must be at least 2");
      const RasterFormat fmt = parse_raster_format(a.format);
      DemTile out;
      if (a.product == "elevation") {
        out = reconstruct_tile(m, w, h);
      } else {
        const TopoRasters t = topo_rasters(m, w, h);
        const Grid* g = a.product == "slope"       ? &t.slope
                        : a.product == "aspect"    ? &t.aspect
                        : a.product == "curvature" ? &t.curvature
                                                   : nullptr;
        if (!g) throw ArgumentError("unknown product '" + a.product + "'");
        out = make_tile(*g, 1.0 / static_cast<double>(std::max(w, h) - 1));
      }
      save_tile(a.output, out, fmt);
      io.out << "wrote=" << a.output << "\nproduct=" << a.product << "\nwidth=" << w << "\nheight=" << h << '\n';
    };
  });
}

// ---------------------------------------------------------------------------

struct MetricsArgs {
  std::string pred;
  std::string model;
  std::string truth;
  std::string format = "raw";
  double sigma = TrainConfig{}.sigma_smooth;
};

void add_metrics(CLI::App& app, MetricsArgs& a, std::function<void()>& action, Streams& io) {
  auto* c = app.add_subcommand("metrics", "Fidelity report against a truth raster");
  auto* pred = c->add_option("--pred", a.pred, "Predicted raster");
  auto* model = c->add_option("-m,--model", a.model, "Model file or container (adds gradmae and bpp)");
  pred->excludes(model);
  c->add_option("--truth", a.truth, "Truth raster")->required();
  c->add_option("--format", a.format, "raw | ascii (both rasters)");
  c->add_option("--sigma", a.sigma, "Smoothing sigma for the gradmae target");
  c->callback([&] {
    action = [&] {
      if (a.pred.empty() == a.model.empty()) throw ArgumentError("metrics needs exactly one of --pred or --model");
      const RasterFormat fmt = parse_raster_format(a.format);
      const DemTile truth = load_tile(a.truth, fmt, 2);
      FidelityReport rep;
      if (!a.pred.empty()) {
        const DemTile pred = load_tile(a.pred, fmt, 2);
        if (!pred.elevations.same_shape(truth.elevations)) throw DataError("prediction and truth differ in size");
        const NormalizedTile nt = normalize(truth);
        Grid np = pred.elevations;
        for (auto& v : np.values) v = (v - nt.z_min) / (nt.z_max - nt.z_min);
        rep.psnr_db = psnr(np, nt.grid);
        const AbsErrors e = mae_maxae(np, nt.grid, nt.z_max - nt.z_min);
        rep.mae_m = e.mae;
        rep.maxae_m = e.maxae;
      } else {
        const TerrainModel m = load_model(a.model);
        rep = evaluate_model(m, truth, a.sigma);
        rep.bpp = bits_per_pixel(read_file(a.model).size(), m.meta);
      }
      io.out << rep.to_text();
    };
  });
}

// ---------------------------------------------------------------------------

struct AnalyzeArgs {
  std::string model;
  std::string output;
  CriticalConfig crit;
  double step = 1e-3;
  int max_steps = 5000;
  std::string rasters;
  int size = 0;
};

void add_analyze(CLI::App& app, AnalyzeArgs& a, std::function<void()>& action, Streams& io) {
  auto* c = app.add_subcommand("analyze", "Critical points, separatrices and topographic rasters");
  c->add_option("-m,--model", a.model, "Model file or container")->required();
  c->add_option("-o,--output", a.output, "JSON-lines output (default stdout)");
  c->add_option("--seed-stride", a.crit.seed_stride, "Grid cells between Newton starts");
  c->add_option("--tol-root", a.crit.tol_root, "Gradient norm accepted as a root");
  c->add_option("--max-iters", a.crit.max_iters, "Newton iterations per start");
  c->add_option("--step", a.step, "Separatrix integration step (normalized units)");
  c->add_option("--max-steps", a.max_steps, "Separatrix step limit");
  c->add_option("--rasters", a.rasters, "Prefix for slope/aspect/curvature raw rasters");
  c->add_option("--size", a.size, "Raster size (0 = training size)");
  c->callback([&] {
    action = [&] {
      const TerrainModel m = load_model(a.model);
      const auto points = find_critical_points(m, a.crit);
      const auto lines = trace_separatrices(m.shape, points, a.step, a.max_steps);
      emit(a.output, critical_net_records(points, lines), io.out);
      if (!a.rasters.empty()) {
        const int w = a.size > 0 ? a.size : m.meta.width;
        const int h = a.size > 0 ? a.size : m.meta.height;
        const TopoRasters t = topo_rasters(m, w, h);
        const double cell = 1.0 / static_cast<double>(std::max(w, h) - 1);
        save_tile(a.rasters + "_slope.raw", make_tile(t.slope, cell));
        save_tile(a.rasters + "_aspect.raw", make_tile(t.aspect, cell));
        save_tile(a.rasters + "_curvature.raw", make_tile(t.curvature, cell));
      }
      std::size_t saddles = 0;
      for (const auto& p : points) saddles += p.kind == CriticalKind::saddle ? 1 : 0;
      io.err << "critical_points=" << points.size() << " saddles=" << saddles << " separatrices=" << lines.size()
             << '\n';
    };
  });
}

// ---------------------------------------------------------------------------

struct SweepArgs {
  std::string model;
  std::string truth;
  std::string format = "raw";
  std::vector<int> bits = kSweepBits;
  std::string output;
};

void add_sweep(CLI::App& app, SweepArgs& a, std::function<void()>& action, Streams& io) {
  auto* c = app.add_subcommand("sweep", "Per-layer quantization sensitivity");
  c->add_option("-m,--model", a.model, "Model file")->required();
  c->add_option("--truth", a.truth, "Truth raster")->required();
  c->add_option("--format", a.format, "raw | ascii");
  c->add_option("--bits", a.bits, "Bit widths")->delimiter(',');
  c->add_option("-o,--output", a.output, "Table output (default stdout)");
  c->callback([&] {
    action = [&] {
      const TerrainModel m = load_model(a.model);
      const DemTile truth = load_tile(a.truth, parse_raster_format(a.format), 2);
      emit(a.output, sensitivity_sweep(m, truth, a.bits).to_text(), io.out);
    };
  });
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Streams io{out, err};
  CLI::App app{"Neural terrain codec: fit, pack and analyze DEM tiles", "iterrain"};
  app.option_defaults()->always_capture_default();
  app.set_config("--config", "", "TOML/INI file with option values (flags override it)");
  app.require_subcommand(1);

  std::function<void()> action;
  GenArgs gen;
  FitArgs fit;
  PackArgs pk;
  UnpackArgs upk;
  QueryArgs query;
  RasterArgs raster;
  MetricsArgs metrics;
  AnalyzeArgs analyze;
  SweepArgs sweep;
  add_gen(app, gen, action, io);
  add_fit(app, fit, action, io);
  add_pack(app, pk, action, io);
  add_unpack(app, upk, action, io);
  add_query(app, query, action, io);
  add_raster(app, raster, action, io);
  add_metrics(app, metrics, action, io);
  add_analyze(app, analyze, action, io);
  add_sweep(app, sweep, action, io);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (action) action();
    return kOk;
  } catch (const ArgumentError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << '\n';
    return kNumeric;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kData;
  }
}

}  // namespace iterrain::cli

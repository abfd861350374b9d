#include "iterrain/raster.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <complex>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include <json.hpp>

namespace iterrain {

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

void require_min_dims(int w, int h, int min_dim) {
  if (w < min_dim || h < min_dim)
    throw DataError("tile is " + std::to_string(w) + "x" + std::to_string(h) +
                    ", below the minimum of " + std::to_string(min_dim) + " cells per side");
}

DemTile load_raw(const std::filesystem::path& path, int min_dim) {
  const auto meta_path = sidecar_path(path);
  std::ifstream meta_in(meta_path);
  if (!meta_in) throw DataError("missing sidecar metadata " + meta_path.string());
  nlohmann::json meta;
  try {
    meta_in >> meta;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed sidecar " + meta_path.string() + ": " + e.what());
  }
  if (!meta.contains("width") || !meta.contains("height") || !meta["width"].is_number_integer() ||
      !meta["height"].is_number_integer())
    throw DataError("sidecar " + meta_path.string() + " lacks integer width/height");
  const long long w = meta["width"].get<long long>();
  const long long h = meta["height"].get<long long>();
  if (w <= 0 || h <= 0 || w > (1 << 16) || h > (1 << 16))
    throw DataError("sidecar dimensions out of range");
  const double cell_size = meta.value("cell_size", 1.0);
  require_min_dims(static_cast<int>(w), static_cast<int>(h), min_dim);

  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::size_t expected = static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * 4;
  if (bytes.size() != expected)
    throw DataError("raw file " + path.string() + " has " + std::to_string(bytes.size()) +
                    " bytes, expected " + std::to_string(expected));

  Grid grid(static_cast<int>(w), static_cast<int>(h));
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const std::uint32_t u = static_cast<std::uint32_t>(bytes[4 * i]) |
                            (static_cast<std::uint32_t>(bytes[4 * i + 1]) << 8) |
                            (static_cast<std::uint32_t>(bytes[4 * i + 2]) << 16) |
                            (static_cast<std::uint32_t>(bytes[4 * i + 3]) << 24);
    grid.values[i] = static_cast<double>(std::bit_cast<float>(u));
  }
  return make_tile(std::move(grid), cell_size);
}

DemTile load_ascii(const std::filesystem::path& path, int min_dim) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::map<std::string, double> header;
  std::string key;
  // Header lines are `key value`; the first token that parses as a number
  // starts the data block.
  while (in >> key) {
    char* end = nullptr;
    std::strtod(key.c_str(), &end);
    if (end != key.c_str() && *end == '\0') break;
    double value = 0.0;
    if (!(in >> value)) throw DataError("malformed ascii-grid header at '" + key + "'");
    header[lower(key)] = value;
    key.clear();
  }
  if (!header.count("ncols") || !header.count("nrows"))
    throw DataError("ascii-grid header lacks ncols/nrows");
  const double ncols = header["ncols"];
  const double nrows = header["nrows"];
  if (ncols < 1 || nrows < 1 || ncols != std::floor(ncols) || nrows != std::floor(nrows) ||
      ncols > (1 << 16) || nrows > (1 << 16))
    throw DataError("ascii-grid ncols/nrows invalid");
  const int w = static_cast<int>(ncols);
  const int h = static_cast<int>(nrows);
  require_min_dims(w, h, min_dim);
  const double cell_size = header.count("cellsize") ? header["cellsize"] : 1.0;
  const bool has_nodata = header.count("nodata_value") > 0;
  const double nodata = has_nodata ? header["nodata_value"] : 0.0;

  Grid grid(w, h);
  std::size_t filled = 0;
  auto push = [&](const std::string& token) {
    char* end = nullptr;
    const double v = std::strtod(token.c_str(), &end);
    if (end == token.c_str() || *end != '\0') throw DataError("non-numeric cell '" + token + "'");
    if (filled >= grid.size()) throw DataError("ascii-grid has more cells than ncols*nrows");
    if (!std::isfinite(v) || (has_nodata && v == nodata)) throw DataError("missing data");
    grid.values[filled++] = v;
  };
  if (!key.empty()) push(key);
  std::string token;
  while (in >> token) push(token);
  if (filled != grid.size()) throw DataError("ascii-grid has fewer cells than ncols*nrows");
  return make_tile(std::move(grid), cell_size);
}

// Index mirrored into [0, n) without repeating the edge sample.
int reflect_index(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

std::vector<double> gaussian_kernel(double sigma) {
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double v = std::exp(-0.5 * (i * i) / (sigma * sigma));
    k[static_cast<std::size_t>(i + radius)] = v;
    sum += v;
  }
  for (auto& v : k) v /= sum;
  return k;
}

double smooth_bump(double r, double radius) {
  if (r >= radius) return 0.0;
  const double t = 1.0 - (r * r) / (radius * radius);
  return t * t;
}

Grid synth_bumps(Rng& rng, int w, int h) {
  struct Bump {
    double cx, cy, amp, sx, sy, cos_t, sin_t;
  };
  std::vector<Bump> bumps;
  for (int i = 0; i < 5; ++i) {
    Bump b{};
    b.cx = rng.uniform(0.15, 0.85);
    b.cy = rng.uniform(0.15, 0.85);
    b.amp = rng.uniform(40.0, 160.0) * (rng.uniform() < 0.25 ? -1.0 : 1.0);
    b.sx = rng.uniform(0.07, 0.22);
    b.sy = rng.uniform(0.07, 0.22);
    const double theta = rng.uniform(0.0, kPi);
    b.cos_t = std::cos(theta);
    b.sin_t = std::sin(theta);
    bumps.push_back(b);
  }
  const double tilt_x = rng.uniform(-30.0, 30.0);
  const double tilt_y = rng.uniform(-30.0, 30.0);
  Grid g(w, h);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const double x = node_coord(c, w);
      const double y = node_coord(r, h);
      double z = 400.0 + tilt_x * x + tilt_y * y;
      for (const auto& b : bumps) {
        const double dx = x - b.cx;
        const double dy = y - b.cy;
        const double u = b.cos_t * dx + b.sin_t * dy;
        const double v = -b.sin_t * dx + b.cos_t * dy;
        z += b.amp * std::exp(-0.5 * (u * u / (b.sx * b.sx) + v * v / (b.sy * b.sy)));
      }
      g(c, r) = z;
    }
  }
  return g;
}

Grid synth_ridge(Rng& rng, int w, int h) {
  const double theta = rng.uniform(0.0, kPi);
  const double spacing = rng.uniform(1.6, 2.6);  // ridges across the tile
  const double wobble = rng.uniform(0.04, 0.09);
  const double wobble_freq = rng.uniform(0.8, 1.6);
  const double phase = rng.uniform(0.0, kTwoPi);
  const double amp = rng.uniform(120.0, 260.0);
  const double bowl = rng.uniform(40.0, 120.0);
  const double tilt = rng.uniform(-60.0, 60.0);
  const double ct = std::cos(theta);
  const double st = std::sin(theta);
  Grid g(w, h);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const double x = node_coord(c, w) - 0.5;
      const double y = node_coord(r, h) - 0.5;
      const double along = ct * x + st * y;
      const double across = -st * x + ct * y;
      const double s = across - wobble * std::sin(kTwoPi * wobble_freq * along + phase);
      // Folded sine: sharp crests where the sine crosses zero.
      const double crest = 1.0 - std::abs(std::sin(kPi * (spacing * s + 0.5)));
      g(c, r) = 800.0 + amp * crest + bowl * (x * x + y * y) + tilt * along;
    }
  }
  return g;
}

Grid synth_flat_plus_cliff(Rng& rng, int w, int h) {
  const double slope_x = rng.uniform(5.0, 25.0);
  const double slope_y = rng.uniform(-15.0, 15.0);
  // The patch stays inside x in [0.54, 0.94] so the left half is a plain plane.
  const double cx = 0.74;
  const double cy = rng.uniform(0.35, 0.65);
  const double radius = 0.2;
  const double cliff = rng.uniform(40.0, 80.0);
  const double tex = rng.uniform(8.0, 16.0);
  const double fx = rng.uniform(14.0, 22.0);
  const double fy = rng.uniform(12.0, 20.0);
  const double p1 = rng.uniform(0.0, kTwoPi);
  const double p2 = rng.uniform(0.0, kTwoPi);
  Grid g(w, h);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const double x = node_coord(c, w);
      const double y = node_coord(r, h);
      double z = 500.0 + slope_x * x + slope_y * y;
      const double dist = std::hypot(x - cx, y - cy);
      const double win = smooth_bump(dist, radius);
      if (win > 0.0) {
        const double step = cliff * std::tanh((x - cx + 0.3 * (y - cy)) / 0.02);
        const double texture = tex * std::sin(kTwoPi * fx * x + p1) * std::sin(kTwoPi * fy * y + p2);
        z += win * (step + texture);
      }
      g(c, r) = z;
    }
  }
  return g;
}

Grid synth_fractal(Rng& rng, int w, int h) {
  using cplx = std::complex<double>;
  const double beta = kFractalSpectralExponent;
  const int kx_max = w / 2;
  const int ky_lo = -(h - 1) / 2;
  const int ky_hi = h / 2;
  const int ny = ky_hi - ky_lo + 1;
  // Half-plane of complex Gaussian coefficients with |c|^2 ~ k^-beta.
  std::vector<cplx> coeff(static_cast<std::size_t>(kx_max + 1) * ny);
  for (int kx = 0; kx <= kx_max; ++kx) {
    for (int ky = ky_lo; ky <= ky_hi; ++ky) {
      const double re = rng.normal();
      const double im = rng.normal();
      const bool keep = kx > 0 || ky > 0;
      const double k = std::hypot(static_cast<double>(kx), static_cast<double>(ky));
      const double a = keep ? std::pow(k, -0.5 * beta) : 0.0;
      coeff[static_cast<std::size_t>(kx) * ny + (ky - ky_lo)] = a * cplx(re, im) / std::sqrt(2.0);
    }
  }
  // Separable inverse DFT: sum over kx for every column x, then over ky.
  std::vector<cplx> partial(static_cast<std::size_t>(ny) * w);
  for (int x = 0; x < w; ++x) {
    for (int kx = 0; kx <= kx_max; ++kx) {
      const double ang = kTwoPi * static_cast<double>(kx) * x / w;
      const cplx e(std::cos(ang), std::sin(ang));
      for (int j = 0; j < ny; ++j)
        partial[static_cast<std::size_t>(j) * w + x] += coeff[static_cast<std::size_t>(kx) * ny + j] * e;
    }
  }
  Grid g(w, h);
  std::vector<cplx> row_phase(static_cast<std::size_t>(ny));
  for (int y = 0; y < h; ++y) {
    for (int j = 0; j < ny; ++j) {
      const double ang = kTwoPi * static_cast<double>(j + ky_lo) * y / h;
      row_phase[static_cast<std::size_t>(j)] = cplx(std::cos(ang), std::sin(ang));
    }
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int j = 0; j < ny; ++j)
        s += (partial[static_cast<std::size_t>(j) * w + x] * row_phase[static_cast<std::size_t>(j)]).real();
      g(x, y) = s;
    }
  }
  const auto [mn, mx] = std::minmax_element(g.values.begin(), g.values.end());
  const double lo = *mn;
  const double span = *mx - *mn;
  for (auto& v : g.values) v = 150.0 + 600.0 * (v - lo) / span;
  return g;
}

}  // namespace

RasterFormat parse_raster_format(std::string_view name) {
  if (name == "raw-f32" || name == "raw") return RasterFormat::raw_f32;
  if (name == "ascii-grid" || name == "ascii" || name == "asc") return RasterFormat::ascii_grid;
  throw ArgumentError("unknown raster format '" + std::string(name) + "'");
}

std::filesystem::path sidecar_path(const std::filesystem::path& raster) {
  auto p = raster;
  p.replace_extension(".json");
  return p;
}

DemTile make_tile(Grid elevations, double cell_size) {
  if (elevations.size() == 0) throw DataError("empty elevation grid");
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (double v : elevations.values) {
    if (!std::isfinite(v)) throw DataError("missing data");
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  DemTile t;
  t.elevations = std::move(elevations);
  t.z_min = lo;
  t.z_max = hi;
  t.cell_size = cell_size;
  return t;
}

DemTile load_tile(const std::filesystem::path& path, RasterFormat format, int min_dim) {
  if (!std::filesystem::exists(path)) throw DataError("no such file " + path.string());
  return format == RasterFormat::raw_f32 ? load_raw(path, min_dim) : load_ascii(path, min_dim);
}

void save_tile(const std::filesystem::path& path, const DemTile& tile, RasterFormat format) {
  const Grid& g = tile.elevations;
  if (format == RasterFormat::raw_f32) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    std::vector<unsigned char> bytes(g.size() * 4);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const auto u = std::bit_cast<std::uint32_t>(static_cast<float>(g.values[i]));
      for (int b = 0; b < 4; ++b) bytes[4 * i + b] = static_cast<unsigned char>(u >> (8 * b));
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    nlohmann::json meta = {{"width", g.width}, {"height", g.height}, {"cell_size", tile.cell_size}};
    std::ofstream meta_out(sidecar_path(path));
    if (!meta_out) throw DataError("cannot write sidecar for " + path.string());
    meta_out << meta.dump(2) << "\n";
    return;
  }
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "ncols " << g.width << "\nnrows " << g.height << "\nxllcorner 0\nyllcorner 0\ncellsize "
      << tile.cell_size << "\nNODATA_value -9999\n";
  out.precision(9);
  for (int r = 0; r < g.height; ++r) {
    for (int c = 0; c < g.width; ++c) out << (c ? " " : "") << g(c, r);
    out << "\n";
  }
}

NormalizedTile normalize(const DemTile& tile) {
  const double range = tile.z_max - tile.z_min;
  if (!(range > 0.0)) throw DataError("zero elevation range");
  NormalizedTile n;
  n.z_min = tile.z_min;
  n.z_max = tile.z_max;
  n.grid = Grid(tile.width(), tile.height());
  for (std::size_t i = 0; i < n.grid.size(); ++i)
    n.grid.values[i] = (tile.elevations.values[i] - tile.z_min) / range;
  return n;
}

DemTile denormalize(const NormalizedTile& tile, double cell_size) {
  const double range = tile.z_max - tile.z_min;
  Grid g(tile.width(), tile.height());
  for (std::size_t i = 0; i < g.size(); ++i) g.values[i] = tile.grid.values[i] * range + tile.z_min;
  DemTile t;
  t.elevations = std::move(g);
  t.z_min = tile.z_min;
  t.z_max = tile.z_max;
  t.cell_size = cell_size;
  return t;
}

Grid gaussian_smooth(const Grid& grid, double sigma) {
  if (!(sigma > 0.0)) throw ArgumentError("gaussian_smooth needs sigma > 0");
  const auto kernel = gaussian_kernel(sigma);
  const int radius = static_cast<int>(kernel.size() / 2);
  const int w = grid.width;
  const int h = grid.height;
  Grid tmp(w, h);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      double s = 0.0;
      for (int k = -radius; k <= radius; ++k)
        s += kernel[static_cast<std::size_t>(k + radius)] * grid(reflect_index(c + k, w), r);
      tmp(c, r) = s;
    }
  }
  Grid out(w, h);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      double s = 0.0;
      for (int k = -radius; k <= radius; ++k)
        s += kernel[static_cast<std::size_t>(k + radius)] * tmp(c, reflect_index(r + k, h));
      out(c, r) = s;
    }
  }
  return out;
}

NormalizedTile gaussian_smooth(const NormalizedTile& tile, double sigma) {
  NormalizedTile out = tile;
  out.grid = gaussian_smooth(tile.grid, sigma);
  for (auto& v : out.grid.values) {
    if (v < 0.0 && v > -1e-6) v = 0.0;
    if (v > 1.0 && v < 1.0 + 1e-6) v = 1.0;
  }
  return out;
}

Grid resample_bilinear(const Grid& grid, int out_w, int out_h) {
  if (out_w < 2 || out_h < 2) throw ArgumentError("resample target must be at least 2x2");
  if (grid.width < 2 || grid.height < 2) throw ArgumentError("resample source must be at least 2x2");
  if (out_w == grid.width && out_h == grid.height) return grid;
  Grid out(out_w, out_h);
  const double sx = static_cast<double>(grid.width - 1) / (out_w - 1);
  const double sy = static_cast<double>(grid.height - 1) / (out_h - 1);
  for (int r = 0; r < out_h; ++r) {
    const double fy = r * sy;
    const int y0 = std::min(static_cast<int>(fy), grid.height - 2);
    const double ty = fy - y0;
    for (int c = 0; c < out_w; ++c) {
      const double fx = c * sx;
      const int x0 = std::min(static_cast<int>(fx), grid.width - 2);
      const double tx = fx - x0;
      const double top = grid(x0, y0) * (1.0 - tx) + grid(x0 + 1, y0) * tx;
      const double bottom = grid(x0, y0 + 1) * (1.0 - tx) + grid(x0 + 1, y0 + 1) * tx;
      out(c, r) = top * (1.0 - ty) + bottom * ty;
    }
  }
  return out;
}

NormalizedTile resample_bilinear(const NormalizedTile& tile, int out_w, int out_h) {
  NormalizedTile out = tile;
  out.grid = resample_bilinear(tile.grid, out_w, out_h);
  return out;
}

GradientGrid finite_diff_gradients(const Grid& grid) {
  const int w = grid.width;
  const int h = grid.height;
  if (w < 3 || h < 3) throw ArgumentError("finite differences need at least 3x3 nodes");
  const double dx = 1.0 / (w - 1);
  const double dy = 1.0 / (h - 1);
  GradientGrid g{Grid(w, h), Grid(w, h)};
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      if (c == 0)
        g.gx(c, r) = (grid(1, r) - grid(0, r)) / dx;
      else if (c == w - 1)
        g.gx(c, r) = (grid(w - 1, r) - grid(w - 2, r)) / dx;
      else
        g.gx(c, r) = (grid(c + 1, r) - grid(c - 1, r)) / (2.0 * dx);
      if (r == 0)
        g.gy(c, r) = (grid(c, 1) - grid(c, 0)) / dy;
      else if (r == h - 1)
        g.gy(c, r) = (grid(c, h - 1) - grid(c, h - 2)) / dy;
      else
        g.gy(c, r) = (grid(c, r + 1) - grid(c, r - 1)) / (2.0 * dy);
    }
  }
  return g;
}

TerrainProfile parse_profile(std::string_view name) {
  if (name == "bumps") return TerrainProfile::bumps;
  if (name == "ridge") return TerrainProfile::ridge;
  if (name == "flat-plus-cliff") return TerrainProfile::flat_plus_cliff;
  if (name == "fractal") return TerrainProfile::fractal;
  throw ArgumentError("unknown profile '" + std::string(name) + "'");
}

std::string_view profile_name(TerrainProfile profile) {
  switch (profile) {
    case TerrainProfile::bumps: return "bumps";
    case TerrainProfile::ridge: return "ridge";
    case TerrainProfile::flat_plus_cliff: return "flat-plus-cliff";
    case TerrainProfile::fractal: return "fractal";
  }
  return "unknown";
}

DemTile synth_tile(std::uint64_t seed, int width, int height, TerrainProfile profile) {
  if (width < 32 || height < 32) throw ArgumentError("synthetic tiles need at least 32x32 cells");
  Rng rng(derive_seed(seed, static_cast<std::uint64_t>(profile)));
  Grid g;
  switch (profile) {
    case TerrainProfile::bumps: g = synth_bumps(rng, width, height); break;
    case TerrainProfile::ridge: g = synth_ridge(rng, width, height); break;
    case TerrainProfile::flat_plus_cliff: g = synth_flat_plus_cliff(rng, width, height); break;
    case TerrainProfile::fractal: g = synth_fractal(rng, width, height); break;
  }
  return make_tile(std::move(g), 1.0);
}

}  // namespace iterrain

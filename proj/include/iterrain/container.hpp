#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "iterrain/quantize.hpp"
#include "iterrain/terrain_model.hpp"

namespace iterrain {

// Bit widths per parameter group. 32 and 64 store floats as-is (f32 / f64).
struct PackConfig {
  int b_shape = 12;
  int b_geom = 8;
  int b_wcf = 8;
  int b_field = 4;

  static PackConfig passthrough(int bits) { return {bits, bits, bits, bits}; }
};

constexpr char kMagic[4] = {'I', 'T', 'V', '2'};
constexpr std::uint16_t kFormatVersion = 1;

// Layout: see docs/FORMAT.md.
std::vector<std::uint8_t> pack(const TerrainModel& model, const PackConfig& cfg = {});
TerrainModel unpack(std::span<const std::uint8_t> bytes);

// The model exactly as unpack(pack(model, cfg)) will return it.
TerrainModel quantize_model(const TerrainModel& model, const PackConfig& cfg);

// Total stored bits per DEM cell.
double bits_per_pixel(std::size_t container_bytes, const TileMeta& meta);

// Min-max field quantization with 2^bits - 1 intervals; endpoints are exact.
struct QuantizedField {
  int bits = 4;
  double lo = 0.0;
  double hi = 0.0;
  std::vector<std::int32_t> levels;
};
QuantizedField quantize_field(const Grid& field, int bits);
Grid dequantize_field(const QuantizedField& q, int width, int height);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

TerrainModel load_model(const std::filesystem::path& path);
void save_model(const std::filesystem::path& path, const TerrainModel& model, const PackConfig& cfg);

}  // namespace iterrain

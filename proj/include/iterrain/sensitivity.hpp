#pragma once

#include <string>
#include <vector>

#include "iterrain/raster.hpp"
#include "iterrain/terrain_model.hpp"

namespace iterrain {

// One quantizable layer group: "shape", "geometry" or "wcf" plus a layer label.
struct LayerGroup {
  std::string stage;
  std::string layer;  // "hidden0".., "output", "decoder"
};

std::vector<LayerGroup> layer_groups(const TerrainModel& model);

struct SweepRow {
  LayerGroup group;
  std::vector<double> delta_db;  // one per bit width
};

struct SweepTable {
  double baseline_db = 0.0;
  std::vector<int> bits;
  std::vector<SweepRow> rows;

  // Tab-separated, one row per group.
  std::string to_text() const;
  const SweepRow* find(const std::string& stage, const std::string& layer) const;
};

inline const std::vector<int> kSweepBits{16, 12, 10, 8};
constexpr int kSweepBiasBits = 16;

// Copy of `model` with only `group` quantized: weights per output channel at
// `bits`, biases per tensor at 16 bits (decoder included).
TerrainModel quantize_group(const TerrainModel& model, const LayerGroup& group, int bits);

// End-to-end PSNR change against `truth` when one group at a time is
// quantized and everything else stays at full precision.
SweepTable sensitivity_sweep(const TerrainModel& model, const DemTile& truth,
                             const std::vector<int>& bits = kSweepBits);

}  // namespace iterrain

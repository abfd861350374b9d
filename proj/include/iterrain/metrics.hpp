#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "iterrain/common.hpp"
#include "iterrain/raster.hpp"

namespace iterrain {

double mean_squared_error(const Grid& pred, const Grid& truth);

// Peak 1 on normalized elevations. Identical grids give +infinity, which
// format_psnr prints as "lossless".
double psnr(const Grid& pred, const Grid& truth);
std::string format_psnr(double db);

// Mean over nodes of |dgx| + |dgy|.
double grad_mae(const GradientGrid& pred, const GradientGrid& truth);

struct AbsErrors {
  double mae = 0.0;
  double maxae = 0.0;
};
// Normalized errors rescaled to meters.
AbsErrors mae_maxae(const Grid& pred, const Grid& truth, double z_range);

struct FidelityReport {
  double psnr_db = 0.0;
  double mae_m = 0.0;
  double maxae_m = 0.0;
  std::optional<double> gradmae;
  std::optional<double> bpp;
  std::vector<std::pair<std::string, double>> timings_ms;

  // One `key=value` per line.
  std::string to_text() const;
};

}  // namespace iterrain

#include "iterrain/metrics.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace iterrain {

namespace {

void require_same(const Grid& a, const Grid& b) {
  if (!a.same_shape(b)) throw ArgumentError("grid dimensions differ");
}

std::string num(double v) {
  std::ostringstream s;
  s.precision(10);
  s << v;
  return s.str();
}

}  // namespace

double mean_squared_error(const Grid& pred, const Grid& truth) {
  require_same(pred, truth);
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred.values[i] - truth.values[i];
    acc += d * d;
  }
  return acc / static_cast<double>(pred.size());
}

double psnr(const Grid& pred, const Grid& truth) {
  const double mse = mean_squared_error(pred, truth);
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return -10.0 * std::log10(mse);
}

std::string format_psnr(double db) { return std::isinf(db) && db > 0 ? "lossless" : num(db); }

double grad_mae(const GradientGrid& pred, const GradientGrid& truth) {
  require_same(pred.gx, truth.gx);
  require_same(pred.gy, truth.gy);
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.gx.size(); ++i)
    acc += std::abs(pred.gx.values[i] - truth.gx.values[i]) + std::abs(pred.gy.values[i] - truth.gy.values[i]);
  return acc / static_cast<double>(pred.gx.size());
}

AbsErrors mae_maxae(const Grid& pred, const Grid& truth, double z_range) {
  require_same(pred, truth);
  if (!(z_range > 0.0)) throw ArgumentError("z_range must be positive");
  AbsErrors e;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = std::abs(pred.values[i] - truth.values[i]);
    e.mae += d;
    e.maxae = std::max(e.maxae, d);
  }
  e.mae = e.mae / static_cast<double>(pred.size()) * z_range;
  e.maxae *= z_range;
  return e;
}

std::string FidelityReport::to_text() const {
  std::ostringstream s;
  s << "psnr_db=" << format_psnr(psnr_db) << '\n';
  s << "mae_m=" << num(mae_m) << '\n';
  s << "maxae_m=" << num(maxae_m) << '\n';
  if (gradmae) s << "gradmae=" << num(*gradmae) << '\n';
  if (bpp) s << "bpp=" << num(*bpp) << '\n';
  for (const auto& [name, ms] : timings_ms) s << name << "_ms=" << num(ms) << '\n';
  return s.str();
}

}  // namespace iterrain

#include "iterrain/quantize.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "iterrain/common.hpp"

namespace iterrain {

double quant_scale(double max_abs, int bits) {
  if (max_abs == 0.0) return 1.0;
  const double levels = static_cast<double>((1 << (bits - 1)) - 1);
  const float s = static_cast<float>(max_abs / levels);
  if (s == 0.0f || !std::isfinite(s)) throw NumericError("quantization scale underflows float32");
  return static_cast<double>(s);
}

QuantizedTensor quantize(const Eigen::MatrixXd& w, int bits, Granularity g) {
  if (!w.allFinite()) throw NumericError("cannot quantize non-finite tensor");
  QuantizedTensor q;
  q.rows = static_cast<int>(w.rows());
  q.cols = static_cast<int>(w.cols());
  q.bits = bits;
  q.granularity = g;
  if (q.passthrough()) {
    q.raw.resize(static_cast<std::size_t>(w.size()));
    for (int r = 0; r < q.rows; ++r)
      for (int c = 0; c < q.cols; ++c) {
        const double v = w(r, c);
        q.raw[static_cast<std::size_t>(r) * static_cast<std::size_t>(q.cols) + static_cast<std::size_t>(c)] =
            bits == 32 ? static_cast<double>(static_cast<float>(v)) : v;
      }
    return q;
  }
  if (bits < kMinBits || bits > kMaxBits)
    throw ArgumentError("bit width must lie in [" + std::to_string(kMinBits) + ", " + std::to_string(kMaxBits) +
                        "] or be 32/64");
  const int groups = g == Granularity::per_channel ? q.rows : 1;
  q.scales.resize(static_cast<std::size_t>(groups));
  for (int gi = 0; gi < groups; ++gi) {
    const double m = g == Granularity::per_channel ? (w.cols() > 0 ? w.row(gi).cwiseAbs().maxCoeff() : 0.0)
                                                   : (w.size() > 0 ? w.cwiseAbs().maxCoeff() : 0.0);
    q.scales[static_cast<std::size_t>(gi)] = static_cast<float>(quant_scale(m, bits));
  }
  const int level = q.max_level();
  q.ints.resize(static_cast<std::size_t>(w.size()));
  for (int r = 0; r < q.rows; ++r) {
    const double s = q.scales[static_cast<std::size_t>(g == Granularity::per_channel ? r : 0)];
    for (int c = 0; c < q.cols; ++c) {
      // std::round rounds half away from zero.
      const double v = std::clamp(std::round(w(r, c) / s), -static_cast<double>(level), static_cast<double>(level));
      q.ints[static_cast<std::size_t>(r) * static_cast<std::size_t>(q.cols) + static_cast<std::size_t>(c)] =
          static_cast<std::int32_t>(v);
    }
  }
  return q;
}

Eigen::MatrixXd dequantize(const QuantizedTensor& q) {
  Eigen::MatrixXd w(q.rows, q.cols);
  for (int r = 0; r < q.rows; ++r) {
    for (int c = 0; c < q.cols; ++c) {
      const std::size_t i = static_cast<std::size_t>(r) * static_cast<std::size_t>(q.cols) + static_cast<std::size_t>(c);
      if (q.passthrough()) {
        w(r, c) = q.raw[i];
      } else {
        const double s = q.scales[static_cast<std::size_t>(q.granularity == Granularity::per_channel ? r : 0)];
        w(r, c) = s * static_cast<double>(q.ints[i]);
      }
    }
  }
  return w;
}

Eigen::MatrixXd fake_quantize(const Eigen::MatrixXd& w, int bits, Granularity g) {
  return dequantize(quantize(w, bits, g));
}

}  // namespace iterrain

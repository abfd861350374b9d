#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

namespace iterrain {

enum class Granularity : std::uint8_t { per_tensor = 0, per_channel = 1 };

// Symmetric uniform quantization. Per-channel scales run over rows (output
// channels). bits == 32 or 64 marks a float passthrough: `raw` holds the
// values and `ints`/`scales` are unused.
struct QuantizedTensor {
  int rows = 0;
  int cols = 0;
  int bits = 8;
  Granularity granularity = Granularity::per_tensor;
  std::vector<float> scales;
  std::vector<std::int32_t> ints;  // row-major
  std::vector<double> raw;         // row-major, passthrough only

  bool passthrough() const { return bits == 32 || bits == 64; }
  int max_level() const { return (1 << (bits - 1)) - 1; }
};

constexpr int kMinBits = 2;
constexpr int kMaxBits = 16;

// s = max|w| / (2^(b-1) - 1) rounded to float32; q = round_half_away(w / s)
// clamped to the symmetric range. All-zero groups get s = 1.
QuantizedTensor quantize(const Eigen::MatrixXd& w, int bits, Granularity g);
Eigen::MatrixXd dequantize(const QuantizedTensor& q);

// Round-trips through quantize/dequantize.
Eigen::MatrixXd fake_quantize(const Eigen::MatrixXd& w, int bits, Granularity g);

double quant_scale(double max_abs, int bits);

}  // namespace iterrain

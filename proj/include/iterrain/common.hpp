#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace iterrain {

// Error hierarchy. The CLI maps each family onto an exit code.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
// Bad input data: malformed files, missing cells, untrainable tiles.
struct DataError : Error {
  using Error::Error;
};
// Corrupt or unsupported container bytes.
struct FormatError : Error {
  using Error::Error;
};
// Divergence, non-finite values, failed numerical preconditions.
struct NumericError : Error {
  using Error::Error;
};
// Query coordinate outside the tolerated domain.
struct DomainError : Error {
  using Error::Error;
};
// Violated argument preconditions.
struct ArgumentError : Error {
  using Error::Error;
};

using Vec2 = std::array<double, 2>;

constexpr double kPi = 3.14159265358979323846;
constexpr double kTwoPi = 2.0 * kPi;

// Row-major scalar grid; (col, row) indexing with col along x.
struct Grid {
  int width = 0;
  int height = 0;
  std::vector<double> values;

  Grid() = default;
  Grid(int w, int h, double fill = 0.0);

  double& operator()(int col, int row) { return values[index(col, row)]; }
  double operator()(int col, int row) const { return values[index(col, row)]; }
  std::size_t index(int col, int row) const {
    return static_cast<std::size_t>(row) * static_cast<std::size_t>(width) +
           static_cast<std::size_t>(col);
  }
  std::size_t size() const { return values.size(); }
  bool same_shape(const Grid& other) const {
    return width == other.width && height == other.height;
  }
};

// Normalized coordinate of grid node i on an axis with n nodes.
inline double node_coord(int i, int n) {
  return n > 1 ? static_cast<double>(i) / static_cast<double>(n - 1) : 0.0;
}

// Deterministic generator. Distributions are computed here rather than
// through <random> distributions, whose output is implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer in [0, n), unbiased.
  std::uint64_t below(std::uint64_t n);
  // Standard normal (Box-Muller).
  double normal();

 private:
  std::mt19937_64 engine_;
};

// SplitMix64 finalizer over (seed, stream) for independent sub-seeds.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

// Partial Fisher-Yates: `count` distinct indices from [0, n).
std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t count, Rng& rng);

}  // namespace iterrain

#include "iterrain/fastmath.hpp"

#include <cmath>
#include <cstdint>

namespace iterrain {

namespace {

constexpr double kInvPio2 = 6.36619772367581382433e-01;
constexpr double kPio2_1 = 1.57079632673412561417e+00;
constexpr double kPio2_2 = 6.07710050630396597660e-11;
constexpr double kPio2_3 = 2.02226624871116645580e-21;
constexpr double kRound = 6755399441055744.0;  // 1.5 * 2^52
constexpr double kLarge = 1e6;

constexpr double S1 = -1.66666666666666324348e-01;
constexpr double S2 = 8.33333333332248946124e-03;
constexpr double S3 = -1.98412698298579493134e-04;
constexpr double S4 = 2.75573137070700676789e-06;
constexpr double S5 = -2.50507602534068634195e-08;
constexpr double S6 = 1.58969099521155010221e-10;

constexpr double C1 = 4.16666666666666019037e-02;
constexpr double C2 = -1.38888888888741095749e-03;
constexpr double C3 = 2.48015872894767294178e-05;
constexpr double C4 = -2.75573143513906633035e-07;
constexpr double C5 = 2.08757232129817482790e-09;
constexpr double C6 = -1.13596475577881948265e-11;

// k = nearest integer to x / (pi/2); returns x - k pi/2 and sets q = k.
inline double reduce(double x, std::int64_t& q) {
  const double k = (x * kInvPio2 + kRound) - kRound;
  q = static_cast<std::int64_t>(k);
  return ((x - k * kPio2_1) - k * kPio2_2) - k * kPio2_3;
}

inline double ksin(double r, double z) { return r + r * z * (S1 + z * (S2 + z * (S3 + z * (S4 + z * (S5 + z * S6))))); }
inline double kcos(double z) { return 1.0 - 0.5 * z + z * z * (C1 + z * (C2 + z * (C3 + z * (C4 + z * (C5 + z * C6))))); }

bool has_large(const double* x, std::size_t n) {
  std::int64_t count = 0;
  for (std::size_t i = 0; i < n; ++i) count += !(std::abs(x[i]) < kLarge);  // NaN counts too
  return count > 0;
}

}  // namespace

void sincos_array(const double* __restrict x, double* __restrict s, double* __restrict c, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    std::int64_t q;
    const double r = reduce(x[i], q);
    const double z = r * r;
    const double sr = ksin(r, z);
    const double cr = kcos(z);
    const std::int64_t odd = q & 1;
    const double sv = odd ? cr : sr;
    const double cv = odd ? sr : cr;
    s[i] = (q & 2) ? -sv : sv;
    c[i] = ((q + 1) & 2) ? -cv : cv;
  }
  if (!has_large(x, n)) return;
  for (std::size_t i = 0; i < n; ++i) {
    if (!(std::abs(x[i]) < kLarge)) {
      s[i] = std::sin(x[i]);
      c[i] = std::cos(x[i]);
    }
  }
}

void sin_array(const double* __restrict x, double* __restrict s, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    std::int64_t q;
    const double r = reduce(x[i], q);
    const double z = r * r;
    const double v = (q & 1) ? kcos(z) : ksin(r, z);
    s[i] = (q & 2) ? -v : v;
  }
  if (!has_large(x, n)) return;
  for (std::size_t i = 0; i < n; ++i)
    if (!(std::abs(x[i]) < kLarge)) s[i] = std::sin(x[i]);
}

}  // namespace iterrain

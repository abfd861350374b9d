#pragma once

#include <cstddef>

#include <Eigen/Dense>

namespace iterrain {

// Joint sine and cosine over a contiguous array. Arguments are reduced by
// pi/2 in three parts and evaluated with fdlibm's kernel polynomials, which
// lets the compiler vectorize the loop. Absolute error stays within a few
// ulp of std::sin/std::cos; arguments beyond 1e6 in magnitude fall back to
// the library functions.
void sincos_array(const double* x, double* s, double* c, std::size_t n);
void sin_array(const double* x, double* s, std::size_t n);

inline void sincos(const Eigen::MatrixXd& x, Eigen::MatrixXd& s, Eigen::MatrixXd& c) {
  s.resize(x.rows(), x.cols());
  c.resize(x.rows(), x.cols());
  sincos_array(x.data(), s.data(), c.data(), static_cast<std::size_t>(x.size()));
}

}  // namespace iterrain

#include "iterrain/siren.hpp"

#include "iterrain/fastmath.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace iterrain {

namespace {

constexpr Eigen::Index kChunk = 2048;

int linf(const std::array<int, 2>& w) { return std::max(std::abs(w[0]), std::abs(w[1])); }

// Half-lattice points with lo < ||w||_inf <= hi, in a fixed enumeration order.
std::vector<std::array<int, 2>> annulus_pool(int lo, int hi) {
  std::vector<std::array<int, 2>> pool;
  for (int x = 0; x <= hi; ++x) {
    for (int y = -hi; y <= hi; ++y) {
      if (!(x > 0 || (x == 0 && y > 0))) continue;
      const int m = linf({x, y});
      if (m > lo && m <= hi) pool.push_back({x, y});
    }
  }
  return pool;
}

Eigen::MatrixXd omega_matrix(const FrequencyTable& freq) {
  Eigen::MatrixXd om(freq.size(), 2);
  for (int i = 0; i < freq.size(); ++i) {
    om(i, 0) = freq.rows[static_cast<std::size_t>(i)][0];
    om(i, 1) = freq.rows[static_cast<std::size_t>(i)][1];
  }
  return om;
}

Eigen::VectorXd phase_vector(const FrequencyTable& freq) {
  return Eigen::Map<const Eigen::VectorXd>(freq.phases.data(), freq.size());
}

void check_coords(const Eigen::Matrix2Xd& coords) {
  for (Eigen::Index j = 0; j < coords.cols(); ++j) check_domain({coords(0, j), coords(1, j)});
}

void check_mask_shape(const SirenStage& stage, const Eigen::MatrixXd& masks, Eigen::Index batch) {
  if (masks.size() == 0) return;
  if (masks.rows() != stage.input_size() || masks.cols() != batch)
    throw ArgumentError("mask matrix must be n x batch");
}

}  // namespace

int FrequencyConfig::neuron_count() const {
  return std::accumulate(band_sizes.begin(), band_sizes.end(), 0);
}

FrequencyConfig shape_frequency_config(std::uint64_t seed) {
  return FrequencyConfig{seed, 10, {}, {128}};
}

FrequencyConfig geometry_frequency_config(std::uint64_t seed) {
  return FrequencyConfig{seed, 6, {14, 22, 31, 40}, {64, 16, 16, 16, 16}};
}

std::vector<int> FrequencyTable::band_sizes() const {
  std::vector<int> sizes(static_cast<std::size_t>(band_count), 0);
  for (int b : band_of) ++sizes[static_cast<std::size_t>(b)];
  return sizes;
}

FrequencyTable build_frequency_table(const FrequencyConfig& config) {
  const int bands = config.high_bands() + 1;
  if (static_cast<int>(config.band_sizes.size()) != bands)
    throw ArgumentError("band_sizes must have K + 1 entries");
  if (config.low_limit < 1) throw ArgumentError("low_limit must be >= 1");
  Rng rng(config.seed);
  FrequencyTable t;
  t.band_count = bands;
  int lo = 0;
  for (int b = 0; b < bands; ++b) {
    const int hi = b == 0 ? config.low_limit : config.band_edges[static_cast<std::size_t>(b - 1)];
    if (hi <= lo) throw ArgumentError("band edges must increase");
    const auto pool = annulus_pool(lo, hi);
    const int want = config.band_sizes[static_cast<std::size_t>(b)];
    if (want < 0 || static_cast<std::size_t>(want) > pool.size())
      throw ArgumentError("band " + std::to_string(b) + " asks for " + std::to_string(want) +
                          " rows but its lattice annulus holds " + std::to_string(pool.size()));
    for (std::size_t idx : sample_without_replacement(pool.size(), static_cast<std::size_t>(want), rng)) {
      t.rows.push_back(pool[idx]);
      t.band_of.push_back(b);
    }
    lo = hi;
  }
  t.phases.resize(t.rows.size());
  for (auto& p : t.phases) p = kTwoPi * rng.uniform();
  t.source = config;
  return t;
}

FrequencyTable explicit_frequency_table(std::vector<std::array<int, 2>> rows, std::vector<double> phases,
                                        std::vector<int> band_of) {
  if (rows.size() != phases.size() || rows.size() != band_of.size() || rows.empty())
    throw ArgumentError("explicit frequency table needs matching, non-empty rows/phases/bands");
  FrequencyTable t;
  t.rows = std::move(rows);
  t.phases = std::move(phases);
  t.band_of = std::move(band_of);
  t.band_count = *std::max_element(t.band_of.begin(), t.band_of.end()) + 1;
  if (*std::min_element(t.band_of.begin(), t.band_of.end()) < 0) throw ArgumentError("negative band index");
  return t;
}

std::size_t LayerStack::parameter_count() const {
  std::size_t n = static_cast<std::size_t>(output.weight.size() + output.bias.size());
  for (const auto& l : hidden) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  return n;
}

void LayerStack::gather(std::span<double> out) const {
  if (out.size() != parameter_count()) throw ArgumentError("gather: size mismatch");
  std::size_t k = 0;
  auto put = [&](const auto& m) {
    std::copy(m.data(), m.data() + m.size(), out.begin() + static_cast<std::ptrdiff_t>(k));
    k += static_cast<std::size_t>(m.size());
  };
  for (const auto& l : hidden) {
    put(l.weight);
    put(l.bias);
  }
  put(output.weight);
  put(output.bias);
}

void LayerStack::scatter(std::span<const double> in) {
  if (in.size() != parameter_count()) throw ArgumentError("scatter: size mismatch");
  std::size_t k = 0;
  auto take = [&](auto& m) {
    std::copy(in.begin() + static_cast<std::ptrdiff_t>(k),
              in.begin() + static_cast<std::ptrdiff_t>(k + static_cast<std::size_t>(m.size())), m.data());
    k += static_cast<std::size_t>(m.size());
  };
  for (auto& l : hidden) {
    take(l.weight);
    take(l.bias);
  }
  take(output.weight);
  take(output.bias);
}

void LayerStack::set_zero() {
  for (auto& l : hidden) {
    l.weight.setZero();
    l.bias.setZero();
  }
  output.weight.setZero();
  output.bias.setZero();
}

LayerStack LayerStack::zeros_like() const {
  LayerStack z = *this;
  z.set_zero();
  return z;
}

int SirenStage::width() const {
  return layers.hidden.empty() ? input_size() : static_cast<int>(layers.hidden.back().weight.rows());
}

SirenStage make_stage(FrequencyTable freq, int width, int hidden_layers, double omega0) {
  if (hidden_layers < 0 || (hidden_layers > 0 && width < 1)) throw ArgumentError("bad stage shape");
  SirenStage s;
  s.omega0 = omega0;
  int fan_in = freq.size();
  s.freq = std::move(freq);
  for (int l = 0; l < hidden_layers; ++l) {
    s.layers.hidden.push_back({Eigen::MatrixXd::Zero(width, fan_in), Eigen::VectorXd::Zero(width)});
    fan_in = width;
  }
  s.layers.output = {Eigen::MatrixXd::Zero(1, fan_in), Eigen::VectorXd::Zero(1)};
  return s;
}

SirenStage init_trainable(SirenStage stage, std::uint64_t seed) {
  Rng rng(seed);
  auto fill = [&](DenseLayer& layer) {
    const double bound = std::sqrt(6.0 / static_cast<double>(layer.weight.cols()));
    // Column-major fill keeps the draw order fixed for a given shape.
    for (Eigen::Index j = 0; j < layer.weight.cols(); ++j)
      for (Eigen::Index i = 0; i < layer.weight.rows(); ++i)
        layer.weight(i, j) = rng.uniform(-bound, bound) / stage.omega0;
    layer.bias.setZero();
  };
  for (auto& l : stage.layers.hidden) fill(l);
  fill(stage.layers.output);
  return stage;
}

void check_domain(Vec2 xy) {
  for (double v : xy) {
    if (!std::isfinite(v) || v < -kDomainMargin || v > 1.0 + kDomainMargin)
      throw DomainError("coordinate (" + std::to_string(xy[0]) + ", " + std::to_string(xy[1]) +
                        ") outside the tile domain");
  }
}

Eigen::Matrix2Xd to_matrix(std::span<const Vec2> coords) {
  Eigen::Matrix2Xd m(2, static_cast<Eigen::Index>(coords.size()));
  for (std::size_t j = 0; j < coords.size(); ++j) {
    m(0, static_cast<Eigen::Index>(j)) = coords[j][0];
    m(1, static_cast<Eigen::Index>(j)) = coords[j][1];
  }
  return m;
}

void forward_tape(const SirenStage& stage, const Eigen::Matrix2Xd& coords, const Eigen::MatrixXd* mask,
                  bool tangents, StageTape& tape) {
  const Eigen::Index batch = coords.cols();
  const int n = stage.input_size();
  const int hidden = stage.hidden_count();
  const Eigen::MatrixXd omega = omega_matrix(stage.freq);

  Eigen::MatrixXd phase = kTwoPi * (omega * coords);
  phase.colwise() += phase_vector(stage.freq);
  sincos(phase, tape.first_sin, tape.first_cos);
  const bool masked = mask != nullptr && mask->size() > 0;
  if (masked) {
    if (mask->rows() != n || mask->cols() != batch) throw ArgumentError("mask matrix must be n x batch");
    tape.mask = *mask;
  } else {
    tape.mask.resize(0, 0);
  }

  tape.act.resize(static_cast<std::size_t>(hidden + 1));
  tape.cos_pre.resize(static_cast<std::size_t>(hidden));
  tape.act[0] = masked ? Eigen::MatrixXd(tape.first_sin.cwiseProduct(tape.mask)) : tape.first_sin;

  tape.tangents = tangents;
  if (tangents) {
    tape.jx.resize(static_cast<std::size_t>(hidden + 1));
    tape.jy.resize(static_cast<std::size_t>(hidden + 1));
    tape.tx.resize(static_cast<std::size_t>(hidden));
    tape.ty.resize(static_cast<std::size_t>(hidden));
    Eigen::MatrixXd scaled = kTwoPi * tape.first_cos;
    if (masked) scaled = scaled.cwiseProduct(tape.mask);
    tape.jx[0] = scaled.array().colwise() * omega.col(0).array();
    tape.jy[0] = scaled.array().colwise() * omega.col(1).array();
  }

  Eigen::MatrixXd pre;
  for (int l = 0; l < hidden; ++l) {
    const auto& layer = stage.layers.hidden[static_cast<std::size_t>(l)];
    const auto L = static_cast<std::size_t>(l);
    pre.noalias() = layer.weight * tape.act[L];
    pre.colwise() += layer.bias;
    pre *= stage.omega0;
    sincos(pre, tape.act[L + 1], tape.cos_pre[L]);
    if (tangents) {
      tape.tx[L].noalias() = stage.omega0 * (layer.weight * tape.jx[L]);
      tape.ty[L].noalias() = stage.omega0 * (layer.weight * tape.jy[L]);
      tape.jx[L + 1] = tape.cos_pre[L].cwiseProduct(tape.tx[L]);
      tape.jy[L + 1] = tape.cos_pre[L].cwiseProduct(tape.ty[L]);
    }
  }

  const auto& out = stage.layers.output;
  const auto last = static_cast<std::size_t>(hidden);
  tape.value.noalias() = out.weight * tape.act[last];
  tape.value.array() += out.bias(0);
  if (tangents) {
    tape.gx.noalias() = out.weight * tape.jx[last];
    tape.gy.noalias() = out.weight * tape.jy[last];
  } else {
    tape.gx.resize(0);
    tape.gy.resize(0);
  }
}

void backward_tape(const SirenStage& stage, const StageTape& tape, const Eigen::RowVectorXd& value_adjoint,
                   const Eigen::RowVectorXd* gx_adjoint, const Eigen::RowVectorXd* gy_adjoint,
                   LayerStack& grads, Eigen::MatrixXd* mask_adjoint) {
  const int hidden = stage.hidden_count();
  const bool tangent_path = tape.tangents && gx_adjoint != nullptr && gy_adjoint != nullptr;
  const auto last = static_cast<std::size_t>(hidden);
  const auto& out = stage.layers.output;

  grads.output.weight.noalias() += value_adjoint * tape.act[last].transpose();
  grads.output.bias(0) += value_adjoint.sum();
  Eigen::MatrixXd h_adj = out.weight.transpose() * value_adjoint;
  Eigen::MatrixXd jx_adj, jy_adj;
  if (tangent_path) {
    grads.output.weight.noalias() += *gx_adjoint * tape.jx[last].transpose();
    grads.output.weight.noalias() += *gy_adjoint * tape.jy[last].transpose();
    jx_adj = out.weight.transpose() * *gx_adjoint;
    jy_adj = out.weight.transpose() * *gy_adjoint;
  }

  Eigen::MatrixXd pre_adj, tx_adj, ty_adj;
  for (int l = hidden - 1; l >= 0; --l) {
    const auto L = static_cast<std::size_t>(l);
    const auto& layer = stage.layers.hidden[L];
    auto& g = grads.hidden[L];
    const auto& cos_a = tape.cos_pre[L];
    const auto& sin_a = tape.act[L + 1];
    pre_adj = cos_a.cwiseProduct(h_adj);
    if (tangent_path) {
      // j_{l+1} = cos(pre) * t_l, so pre also receives -sin(pre) * t_l * j_adj.
      pre_adj.array() -= sin_a.array() * (tape.tx[L].array() * jx_adj.array() + tape.ty[L].array() * jy_adj.array());
      tx_adj = stage.omega0 * cos_a.cwiseProduct(jx_adj);
      ty_adj = stage.omega0 * cos_a.cwiseProduct(jy_adj);
    }
    pre_adj *= stage.omega0;
    g.weight.noalias() += pre_adj * tape.act[L].transpose();
    g.bias.noalias() += pre_adj.rowwise().sum();
    if (tangent_path) {
      g.weight.noalias() += tx_adj * tape.jx[L].transpose();
      g.weight.noalias() += ty_adj * tape.jy[L].transpose();
    }
    if (l > 0 || mask_adjoint != nullptr) {
      h_adj.noalias() = layer.weight.transpose() * pre_adj;
      if (tangent_path) {
        jx_adj.noalias() = layer.weight.transpose() * tx_adj;
        jy_adj.noalias() = layer.weight.transpose() * ty_adj;
      }
    }
  }

  if (mask_adjoint != nullptr) {
    // act0 = sin(phase) * m, j0 = 2 pi cos(phase) omega * m.
    Eigen::MatrixXd adj = tape.first_sin.cwiseProduct(h_adj);
    if (tangent_path) {
      const Eigen::MatrixXd omega = omega_matrix(stage.freq);
      Eigen::MatrixXd tan = jx_adj.array().colwise() * omega.col(0).array();
      tan.array() += jy_adj.array().colwise() * omega.col(1).array();
      adj.noalias() += kTwoPi * tape.first_cos.cwiseProduct(tan);
    }
    *mask_adjoint = std::move(adj);
  }
}

std::vector<EvalResult> batch_eval(const SirenStage& stage, std::span<const Vec2> coords,
                                   const Eigen::MatrixXd& masks, EvalMode mode) {
  const auto batch = static_cast<Eigen::Index>(coords.size());
  if (batch == 0) throw ArgumentError("batch_eval needs at least one coordinate");
  check_mask_shape(stage, masks, batch);
  const Eigen::Matrix2Xd all = to_matrix(coords);
  check_coords(all);
  std::vector<EvalResult> results(coords.size());
  StageTape tape;
  const bool tangents = mode == EvalMode::value_grad;
  for (Eigen::Index start = 0; start < batch; start += kChunk) {
    const Eigen::Index len = std::min(kChunk, batch - start);
    const Eigen::Matrix2Xd chunk = all.middleCols(start, len);
    if (masks.size() > 0) {
      const Eigen::MatrixXd m = masks.middleCols(start, len);
      forward_tape(stage, chunk, &m, tangents, tape);
    } else {
      forward_tape(stage, chunk, nullptr, tangents, tape);
    }
    for (Eigen::Index j = 0; j < len; ++j) {
      auto& r = results[static_cast<std::size_t>(start + j)];
      r.value = tape.value(j);
      if (tangents) r.grad = {tape.gx(j), tape.gy(j)};
    }
  }
  return results;
}

std::vector<EvalResult> batch_eval(const SirenStage& stage, std::span<const Vec2> coords, EvalMode mode) {
  return batch_eval(stage, coords, Eigen::MatrixXd(), mode);
}

std::vector<EvalResult> batch_eval_hessian(const SirenStage& stage, std::span<const Vec2> coords,
                                           const Eigen::MatrixXd& masks) {
  const auto batch = static_cast<Eigen::Index>(coords.size());
  if (batch == 0) throw ArgumentError("batch_eval_hessian needs at least one coordinate");
  check_mask_shape(stage, masks, batch);
  const Eigen::Matrix2Xd all = to_matrix(coords);
  check_coords(all);
  const Eigen::MatrixXd omega = omega_matrix(stage.freq);
  const Eigen::VectorXd phases = phase_vector(stage.freq);
  const Eigen::ArrayXd wx = omega.col(0).array();
  const Eigen::ArrayXd wy = omega.col(1).array();
  std::vector<EvalResult> results(coords.size());

  for (Eigen::Index start = 0; start < batch; start += kChunk) {
    const Eigen::Index len = std::min(kChunk, batch - start);
    Eigen::MatrixXd phase = kTwoPi * (omega * all.middleCols(start, len));
    phase.colwise() += phases;
    Eigen::MatrixXd sm, cm;
    sincos(phase, sm, cm);
    Eigen::ArrayXXd s = sm.array();
    Eigen::ArrayXXd c = cm.array();
    if (masks.size() > 0) {
      s *= masks.middleCols(start, len).array();
      c *= masks.middleCols(start, len).array();
    }
    // Value, first and second input derivatives of the current activations.
    Eigen::MatrixXd h = s.matrix();
    Eigen::MatrixXd hx = (kTwoPi * c).colwise() * wx;
    Eigen::MatrixXd hy = (kTwoPi * c).colwise() * wy;
    const double k2 = kTwoPi * kTwoPi;
    Eigen::MatrixXd hxx = (-k2 * s).colwise() * (wx * wx);
    Eigen::MatrixXd hxy = (-k2 * s).colwise() * (wx * wy);
    Eigen::MatrixXd hyy = (-k2 * s).colwise() * (wy * wy);

    for (const auto& layer : stage.layers.hidden) {
      const double w0 = stage.omega0;
      Eigen::MatrixXd a = w0 * (layer.weight * h);
      a.colwise() += w0 * layer.bias;
      const Eigen::MatrixXd ax = w0 * (layer.weight * hx);
      const Eigen::MatrixXd ay = w0 * (layer.weight * hy);
      const Eigen::MatrixXd axx = w0 * (layer.weight * hxx);
      const Eigen::MatrixXd axy = w0 * (layer.weight * hxy);
      const Eigen::MatrixXd ayy = w0 * (layer.weight * hyy);
      Eigen::MatrixXd sa_m, ca_m;
      sincos(a, sa_m, ca_m);
      const Eigen::ArrayXXd sa = sa_m.array();
      const Eigen::ArrayXXd ca = ca_m.array();
      h = sa.matrix();
      hx = (ca * ax.array()).matrix();
      hy = (ca * ay.array()).matrix();
      hxx = (ca * axx.array() - sa * ax.array() * ax.array()).matrix();
      hxy = (ca * axy.array() - sa * ax.array() * ay.array()).matrix();
      hyy = (ca * ayy.array() - sa * ay.array() * ay.array()).matrix();
    }
    const auto& out = stage.layers.output;
    const Eigen::RowVectorXd v = out.weight * h;
    const Eigen::RowVectorXd gx = out.weight * hx;
    const Eigen::RowVectorXd gy = out.weight * hy;
    const Eigen::RowVectorXd fxx = out.weight * hxx;
    const Eigen::RowVectorXd fxy = out.weight * hxy;
    const Eigen::RowVectorXd fyy = out.weight * hyy;
    for (Eigen::Index j = 0; j < len; ++j) {
      auto& r = results[static_cast<std::size_t>(start + j)];
      r.value = v(j) + out.bias(0);
      r.grad = {gx(j), gy(j)};
      r.hessian = Hessian2{{{fxx(j), fxy(j)}, {fxy(j), fyy(j)}}};
    }
  }
  return results;
}

namespace {

Eigen::MatrixXd single_mask(const SirenStage& stage, std::span<const double> mask) {
  if (mask.empty()) return {};
  if (static_cast<int>(mask.size()) != stage.input_size()) throw ArgumentError("mask length must equal n");
  return Eigen::Map<const Eigen::MatrixXd>(mask.data(), static_cast<Eigen::Index>(mask.size()), 1);
}

}  // namespace

double forward(const SirenStage& stage, Vec2 xy, std::span<const double> mask) {
  const Vec2 pts[1] = {xy};
  return batch_eval(stage, pts, single_mask(stage, mask), EvalMode::value)[0].value;
}

EvalResult eval_with_grad(const SirenStage& stage, Vec2 xy, std::span<const double> mask) {
  const Vec2 pts[1] = {xy};
  return batch_eval(stage, pts, single_mask(stage, mask), EvalMode::value_grad)[0];
}

EvalResult eval_with_hessian(const SirenStage& stage, Vec2 xy, std::span<const double> mask) {
  const Vec2 pts[1] = {xy};
  return batch_eval_hessian(stage, pts, single_mask(stage, mask))[0];
}

}  // namespace iterrain

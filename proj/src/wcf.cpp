#include "iterrain/wcf.hpp"

#include <algorithm>
#include <cmath>

#include "iterrain/raster.hpp"

namespace iterrain {

namespace {

// (in * 9) x (out pixels) patch matrix for a 3x3 kernel with zero padding 1.
Eigen::MatrixXd im2col(const FeatureMap& in, int stride, int ow, int oh) {
  const int c = static_cast<int>(in.data.rows());
  Eigen::MatrixXd cols = Eigen::MatrixXd::Zero(c * 9, static_cast<Eigen::Index>(ow) * oh);
  for (int oy = 0; oy < oh; ++oy) {
    for (int ox = 0; ox < ow; ++ox) {
      const Eigen::Index p = static_cast<Eigen::Index>(oy) * ow + ox;
      for (int ky = 0; ky < 3; ++ky) {
        const int iy = oy * stride + ky - 1;
        if (iy < 0 || iy >= in.height) continue;
        for (int kx = 0; kx < 3; ++kx) {
          const int ix = ox * stride + kx - 1;
          if (ix < 0 || ix >= in.width) continue;
          const Eigen::Index src = static_cast<Eigen::Index>(iy) * in.width + ix;
          for (int ch = 0; ch < c; ++ch) cols(ch * 9 + ky * 3 + kx, p) = in.data(ch, src);
        }
      }
    }
  }
  return cols;
}

void col2im_add(const Eigen::MatrixXd& cols, int stride, int ow, int oh, FeatureMap& out) {
  const int c = static_cast<int>(out.data.rows());
  for (int oy = 0; oy < oh; ++oy) {
    for (int ox = 0; ox < ow; ++ox) {
      const Eigen::Index p = static_cast<Eigen::Index>(oy) * ow + ox;
      for (int ky = 0; ky < 3; ++ky) {
        const int iy = oy * stride + ky - 1;
        if (iy < 0 || iy >= out.height) continue;
        for (int kx = 0; kx < 3; ++kx) {
          const int ix = ox * stride + kx - 1;
          if (ix < 0 || ix >= out.width) continue;
          const Eigen::Index dst = static_cast<Eigen::Index>(iy) * out.width + ix;
          for (int ch = 0; ch < c; ++ch) out.data(ch, dst) += cols(ch * 9 + ky * 3 + kx, p);
        }
      }
    }
  }
}

ConvLayer zero_layer(int in, int out, int stride) {
  return {in, out, stride, Eigen::MatrixXd::Zero(out, in * 9), Eigen::VectorXd::Zero(out)};
}

}  // namespace

FeatureMap to_feature_map(const SwtFeatures& features) {
  FeatureMap m;
  m.width = features.width();
  m.height = features.height();
  m.data.resize(kFeatureChannels, static_cast<Eigen::Index>(m.width) * m.height);
  for (int c = 0; c < kFeatureChannels; ++c) {
    const auto& v = features.channels[static_cast<std::size_t>(c)].values;
    m.data.row(c) = Eigen::Map<const Eigen::RowVectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
  }
  return m;
}

int conv_output_size(int n, int stride) { return (n - 1) / stride + 1; }

FeatureMap conv2d(const ConvLayer& layer, const FeatureMap& input) {
  if (input.data.rows() != layer.in_channels) throw ArgumentError("conv2d: channel mismatch");
  FeatureMap out;
  out.width = conv_output_size(input.width, layer.stride);
  out.height = conv_output_size(input.height, layer.stride);
  out.data.noalias() = layer.weight * im2col(input, layer.stride, out.width, out.height);
  out.data.colwise() += layer.bias;
  return out;
}

std::size_t WcfDecoder::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  return n;
}

void WcfDecoder::gather(std::span<double> out) const {
  if (out.size() != parameter_count()) throw ArgumentError("gather: size mismatch");
  auto it = out.begin();
  for (const auto& l : layers) {
    it = std::copy(l.weight.data(), l.weight.data() + l.weight.size(), it);
    it = std::copy(l.bias.data(), l.bias.data() + l.bias.size(), it);
  }
}

void WcfDecoder::scatter(std::span<const double> in) {
  if (in.size() != parameter_count()) throw ArgumentError("scatter: size mismatch");
  auto it = in.begin();
  for (auto& l : layers) {
    std::copy(it, it + l.weight.size(), l.weight.data());
    it += l.weight.size();
    std::copy(it, it + l.bias.size(), l.bias.data());
    it += l.bias.size();
  }
}

WcfDecoder WcfDecoder::zeros_like() const {
  WcfDecoder z = *this;
  for (auto& l : z.layers) {
    l.weight.setZero();
    l.bias.setZero();
  }
  return z;
}

WcfDecoder make_decoder(int hidden_channels) {
  if (hidden_channels < 1) throw ArgumentError("decoder needs at least one hidden channel");
  WcfDecoder d;
  d.layers[0] = zero_layer(kFeatureChannels, hidden_channels, 2);
  d.layers[1] = zero_layer(hidden_channels, hidden_channels, 2);
  d.layers[2] = zero_layer(hidden_channels, 1, 1);
  return d;
}

WcfDecoder init_decoder(std::uint64_t seed, int hidden_channels) {
  WcfDecoder d = make_decoder(hidden_channels);
  Rng rng(seed);
  for (auto& l : d.layers) {
    const double bound = std::sqrt(6.0 / static_cast<double>(l.weight.cols()));
    for (Eigen::Index j = 0; j < l.weight.cols(); ++j)
      for (Eigen::Index i = 0; i < l.weight.rows(); ++i) l.weight(i, j) = rng.uniform(-bound, bound);
  }
  return d;
}

ComplexityField instance_normalize(const Grid& raw, double eps) {
  const double n = static_cast<double>(raw.size());
  double mean = 0.0;
  for (double v : raw.values) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : raw.values) var += (v - mean) * (v - mean);
  ComplexityField f;
  f.mu_c = mean;
  f.sigma_c = std::sqrt(var / n);
  f.eps = eps;
  f.c_hat = Grid(raw.width, raw.height);
  const double denom = f.sigma_c + eps;
  for (std::size_t i = 0; i < raw.size(); ++i) f.c_hat.values[i] = (raw.values[i] - mean) / denom;
  return f;
}

Grid instance_normalize_backward(const Grid& raw, const ComplexityField& field, const Grid& c_hat_adjoint) {
  const std::size_t count = raw.size();
  const double n = static_cast<double>(count);
  const double denom = field.sigma_c + field.eps;
  double g_mean = 0.0;
  double g_dot = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    g_mean += c_hat_adjoint.values[i];
    g_dot += c_hat_adjoint.values[i] * (raw.values[i] - field.mu_c);
  }
  g_mean /= n;
  // d sigma / d c_j = (c_j - mu) / (n sigma); zero when the field is constant.
  const double k = field.sigma_c > 0.0 ? g_dot / (denom * denom * n * field.sigma_c) : 0.0;
  Grid out(raw.width, raw.height);
  for (std::size_t i = 0; i < count; ++i)
    out.values[i] = (c_hat_adjoint.values[i] - g_mean) / denom - k * (raw.values[i] - field.mu_c);
  return out;
}

Grid decode_raw(const WcfDecoder& decoder, const FeatureMap& features, DecoderTape* tape) {
  FeatureMap x = features;
  for (std::size_t l = 0; l < 3; ++l) {
    if (tape != nullptr) tape->inputs[l] = x;
    FeatureMap y = conv2d(decoder.layers[l], x);
    if (l < 2) {
      if (tape != nullptr) tape->pre[l] = y;
      y.data = y.data.cwiseMax(0.0);
    }
    x = std::move(y);
  }
  Grid raw(x.width, x.height);
  Eigen::Map<Eigen::RowVectorXd>(raw.values.data(), x.data.cols()) = x.data.row(0);
  return raw;
}

ComplexityField decode_complexity(const WcfDecoder& decoder, const SwtFeatures& features) {
  return instance_normalize(decode_raw(decoder, to_feature_map(features)));
}

void decode_backward(const WcfDecoder& decoder, const DecoderTape& tape, const Grid& raw_adjoint,
                     WcfDecoder& grads) {
  Eigen::MatrixXd adj =
      Eigen::Map<const Eigen::RowVectorXd>(raw_adjoint.values.data(), static_cast<Eigen::Index>(raw_adjoint.size()));
  for (int l = 2; l >= 0; --l) {
    const auto L = static_cast<std::size_t>(l);
    const ConvLayer& layer = decoder.layers[L];
    const FeatureMap& in = tape.inputs[L];
    const int ow = conv_output_size(in.width, layer.stride);
    const int oh = conv_output_size(in.height, layer.stride);
    const Eigen::MatrixXd cols = im2col(in, layer.stride, ow, oh);
    grads.layers[L].weight.noalias() += adj * cols.transpose();
    grads.layers[L].bias.noalias() += adj.rowwise().sum();
    if (l == 0) break;
    const Eigen::MatrixXd dcols = layer.weight.transpose() * adj;
    FeatureMap din{in.width, in.height, Eigen::MatrixXd::Zero(in.data.rows(), in.data.cols())};
    col2im_add(dcols, layer.stride, ow, oh, din);
    const Eigen::MatrixXd& pre = tape.pre[L - 1].data;
    adj = (pre.array() > 0.0).select(din.data, 0.0);
  }
}

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

std::vector<double> ThresholdSet::taus() const {
  std::vector<double> t(static_cast<std::size_t>(count()));
  t[0] = tau_tilde_1;
  for (std::size_t i = 1; i < t.size(); ++i) t[i] = t[i - 1] + softplus(deltas[i - 1]);
  return t;
}

ThresholdSet default_thresholds(int k) {
  if (k < 1) throw ArgumentError("need at least one threshold");
  ThresholdSet ts;
  ts.tau_tilde_1 = -1.5;
  ts.deltas.assign(static_cast<std::size_t>(k - 1), std::log(std::exp(1.0) - 1.0));
  return ts;
}

std::vector<double> thresholds_backward(const ThresholdSet& ts, std::span<const double> taus_adjoint) {
  const std::size_t k = static_cast<std::size_t>(ts.count());
  if (taus_adjoint.size() != k) throw ArgumentError("thresholds_backward: size mismatch");
  std::vector<double> out(k, 0.0);
  // tau_i depends on tau_tilde_1 and every delta_j with j <= i.
  double suffix = 0.0;
  for (std::size_t i = k; i-- > 1;) {
    suffix += taus_adjoint[i];
    out[i] = suffix * sigmoid(ts.deltas[i - 1]);
  }
  out[0] = suffix + taus_adjoint[0];
  return out;
}

Bilinear bilinear_stencil(int w, int h, Vec2 xy) {
  auto axis = [](double t, int n, std::size_t& i0, std::size_t& i1, double& f) {
    if (n == 1) {
      i0 = i1 = 0;
      f = 0.0;
      return;
    }
    const double u = std::clamp(t, 0.0, 1.0) * (n - 1);
    int i = static_cast<int>(std::floor(u));
    i = std::min(i, n - 2);
    i0 = static_cast<std::size_t>(i);
    i1 = i0 + 1;
    f = u - i;
  };
  std::size_t x0, x1, y0, y1;
  double fx, fy;
  axis(xy[0], w, x0, x1, fx);
  axis(xy[1], h, y0, y1, fy);
  const auto W = static_cast<std::size_t>(w);
  Bilinear b;
  b.index = {y0 * W + x0, y0 * W + x1, y1 * W + x0, y1 * W + x1};
  b.weight = {(1 - fx) * (1 - fy), fx * (1 - fy), (1 - fx) * fy, fx * fy};
  return b;
}

double field_value(const ComplexityField& field, Vec2 xy) {
  const Bilinear b = bilinear_stencil(field.width(), field.height(), xy);
  double v = 0.0;
  for (int k = 0; k < 4; ++k) v += b.weight[k] * field.c_hat.values[b.index[k]];
  return v;
}

std::vector<double> band_masks(const ComplexityField& field, const ThresholdSet& ts, Vec2 xy) {
  const double c = field_value(field, xy);
  std::vector<double> m;
  for (double tau : ts.taus()) m.push_back(sigmoid(c - tau));
  return m;
}

std::vector<double> neuron_mask(const FrequencyTable& freq, std::span<const double> band_mask_values) {
  if (static_cast<int>(band_mask_values.size()) + 1 < freq.band_count)
    throw ArgumentError("not enough band masks for the frequency table");
  std::vector<double> m(freq.rows.size());
  for (std::size_t i = 0; i < m.size(); ++i) {
    const int b = freq.band_of[i];
    m[i] = b == 0 ? 1.0 : band_mask_values[static_cast<std::size_t>(b - 1)];
  }
  return m;
}

Eigen::MatrixXd neuron_masks(const FrequencyTable& freq, const ComplexityField& field, const ThresholdSet& ts,
                             std::span<const Vec2> coords) {
  Eigen::MatrixXd out(freq.size(), static_cast<Eigen::Index>(coords.size()));
  for (std::size_t j = 0; j < coords.size(); ++j) {
    const auto m = neuron_mask(freq, band_masks(field, ts, coords[j]));
    out.col(static_cast<Eigen::Index>(j)) = Eigen::Map<const Eigen::VectorXd>(m.data(), freq.size());
  }
  return out;
}

std::vector<double> sampling_distribution(const ComplexityField& field, double alpha, double eps_s, int w,
                                          int h) {
  if (alpha < 0.0 || alpha > 1.0) throw ArgumentError("alpha must lie in [0, 1]");
  if (!(eps_s > 0.0)) throw ArgumentError("eps_s must be positive");
  const Grid up = resample_bilinear(field.c_hat, w, h);
  const double n = static_cast<double>(up.size());
  std::vector<double> p(up.size());
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = std::max(up.values[i], eps_s);
    total += p[i];
  }
  for (auto& v : p) v = (1.0 - alpha) / n + alpha * v / total;
  return p;
}

std::vector<std::size_t> draw_samples(std::span<const double> p, std::size_t count, Rng& rng) {
  if (count == 0) throw ArgumentError("draw_samples: count must be >= 1");
  if (p.empty()) throw ArgumentError("draw_samples: empty distribution");
  std::vector<double> cdf(p.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!(p[i] >= 0.0)) throw ArgumentError("draw_samples: negative probability");
    acc += p[i];
    cdf[i] = acc;
  }
  std::vector<std::size_t> out(count);
  for (auto& idx : out) {
    const double u = rng.uniform() * acc;
    // First cell whose cumulative mass exceeds u; zero-mass cells are never chosen.
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    idx = static_cast<std::size_t>(it - cdf.begin());
    if (idx == p.size()) {
      idx = p.size() - 1;
      while (idx > 0 && p[idx] == 0.0) --idx;
    }
  }
  return out;
}

std::vector<std::size_t> draw_samples(std::span<const double> p, std::size_t count, std::uint64_t seed) {
  Rng rng(seed);
  return draw_samples(p, count, rng);
}

}  // namespace iterrain

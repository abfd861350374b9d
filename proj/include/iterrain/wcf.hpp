#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "iterrain/common.hpp"
#include "iterrain/siren.hpp"
#include "iterrain/wavelet.hpp"

namespace iterrain {

// 3x3 convolution with zero padding 1. Weight columns are ordered
// (channel, ky, kx) with kx fastest.
struct ConvLayer {
  int in_channels = 0;
  int out_channels = 0;
  int stride = 1;
  Eigen::MatrixXd weight;  // out x (in * 9)
  Eigen::VectorXd bias;
};

// Channels x pixels, pixels row-major.
struct FeatureMap {
  int width = 0;
  int height = 0;
  Eigen::MatrixXd data;
};

FeatureMap to_feature_map(const SwtFeatures& features);

int conv_output_size(int n, int stride);
FeatureMap conv2d(const ConvLayer& layer, const FeatureMap& input);

// 7 -> hidden -> hidden -> 1, strides 2, 2, 1, ReLU after the first two layers.
struct WcfDecoder {
  std::array<ConvLayer, 3> layers;

  int hidden_channels() const { return layers[0].out_channels; }
  std::size_t parameter_count() const;
  void gather(std::span<double> out) const;
  void scatter(std::span<const double> in);
  WcfDecoder zeros_like() const;
};

constexpr int kDecoderHidden = 48;

// Zero parameters with the right shapes.
WcfDecoder make_decoder(int hidden_channels = kDecoderHidden);
// Weights U(-sqrt(6/fan_in), sqrt(6/fan_in)), biases zero.
WcfDecoder init_decoder(std::uint64_t seed, int hidden_channels = kDecoderHidden);

constexpr double kInstanceNormEps = 1e-5;

// Instance-normalized low-resolution complexity field.
struct ComplexityField {
  Grid c_hat;
  double mu_c = 0.0;
  double sigma_c = 0.0;
  double eps = kInstanceNormEps;

  int width() const { return c_hat.width; }
  int height() const { return c_hat.height; }
};

ComplexityField instance_normalize(const Grid& raw, double eps = kInstanceNormEps);
// Adjoint of instance_normalize with respect to the raw field.
Grid instance_normalize_backward(const Grid& raw, const ComplexityField& field, const Grid& c_hat_adjoint);

struct DecoderTape {
  std::array<FeatureMap, 3> inputs;  // post-activation input of each layer
  std::array<FeatureMap, 2> pre;     // pre-ReLU outputs of layers 0 and 1
};

// Raw decoder output before instance normalization.
Grid decode_raw(const WcfDecoder& decoder, const FeatureMap& features, DecoderTape* tape = nullptr);
ComplexityField decode_complexity(const WcfDecoder& decoder, const SwtFeatures& features);
// Accumulates parameter gradients for the adjoint of the raw output.
void decode_backward(const WcfDecoder& decoder, const DecoderTape& tape, const Grid& raw_adjoint,
                     WcfDecoder& grads);

// tau_1 = tau_tilde_1, tau_i = tau_{i-1} + softplus(delta_i).
struct ThresholdSet {
  double tau_tilde_1 = -1.5;
  std::vector<double> deltas;  // K - 1 entries

  int count() const { return static_cast<int>(deltas.size()) + 1; }
  std::vector<double> taus() const;
};

double softplus(double x);
double sigmoid(double x);

// Unit spacing starting at -1.5: (-1.5, -0.5, 0.5, 1.5) for K = 4.
ThresholdSet default_thresholds(int k);

// Adjoint of taus(): returns d/d tau_tilde_1 followed by d/d delta_i.
std::vector<double> thresholds_backward(const ThresholdSet& ts, std::span<const double> taus_adjoint);

// Corner-aligned bilinear stencil into a w x h grid; coordinates are clamped
// to the unit square first.
struct Bilinear {
  std::array<std::size_t, 4> index{};
  std::array<double, 4> weight{};
};
Bilinear bilinear_stencil(int w, int h, Vec2 xy);
double field_value(const ComplexityField& field, Vec2 xy);

// m_i = sigmoid(c_hat(xy) - tau_i) for i = 1..K.
std::vector<double> band_masks(const ComplexityField& field, const ThresholdSet& ts, Vec2 xy);
// Per-neuron gains: band 0 neurons get 1, band i >= 1 neurons get m_i.
std::vector<double> neuron_mask(const FrequencyTable& freq, std::span<const double> band_mask_values);
// n x coords.size() mask matrix for a batch of coordinates.
Eigen::MatrixXd neuron_masks(const FrequencyTable& freq, const ComplexityField& field, const ThresholdSet& ts,
                             std::span<const Vec2> coords);

constexpr double kSamplingAlpha = 0.75;
constexpr double kSamplingEps = 0.01;

// Mixture of uniform and complexity-weighted sampling over a w x h grid.
std::vector<double> sampling_distribution(const ComplexityField& field, double alpha, double eps_s, int w,
                                          int h);

// Inverse-CDF draws with replacement.
std::vector<std::size_t> draw_samples(std::span<const double> p, std::size_t count, Rng& rng);
std::vector<std::size_t> draw_samples(std::span<const double> p, std::size_t count, std::uint64_t seed);

}  // namespace iterrain

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>

#include <Eigen/Dense>

#include "iterrain/metrics.hpp"
#include "iterrain/raster.hpp"
#include "iterrain/siren.hpp"
#include "iterrain/terrain_model.hpp"
#include "iterrain/wcf.hpp"

namespace iterrain {

struct LogRecord {
  int iteration = 0;
  std::string_view phase;
  double loss = 0.0;
  double wall_ms = 0.0;
};

// `iter=<i> phase=<shape|geometry> loss=<l> wall_ms=<t>`
std::string format_log_record(const LogRecord& rec);

struct TrainConfig {
  int shape_iters = 3000;
  int geom_iters = 2000;
  double lr = 1e-4;
  double lambda_grad = 0.1;
  int grad_samples = 10000;  // M, capped at the number of target nodes
  double shape_subsample_frac = 0.25;
  double geom_sample_frac = 0.25;  // >= 1 trains on every node each iteration
  double alpha = kSamplingAlpha;
  double eps_s = kSamplingEps;
  double sigma_smooth = 4.0;
  double omega0_shape = 30.0;
  double omega0_geom = 150.0;
  int width = 128;
  int hidden_layers = 3;
  int decoder_channels = kDecoderHidden;
  bool use_masks = true;
  std::uint64_t init_seed = 1;    // frequency tables and initial weights
  std::uint64_t sample_seed = 2;  // per-iteration batches

  std::function<void(const LogRecord&)> log;
  int log_every = 100;

  void validate() const;
};

// Frequency configurations and initial parameters derived from cfg.init_seed.
SirenStage initial_shape_stage(const TrainConfig& cfg);
SirenStage initial_geometry_stage(const TrainConfig& cfg);
WcfDecoder initial_decoder(const TrainConfig& cfg);

// Coordinates are columns; targets are normalized elevations and their
// gradients per normalized coordinate.
struct ShapeBatch {
  Eigen::Matrix2Xd mse_coords;
  Eigen::RowVectorXd mse_targets;
  Eigen::Matrix2Xd grad_coords;
  Eigen::RowVectorXd gx_targets;
  Eigen::RowVectorXd gy_targets;
};

// L_MSE + lambda * L_grad with L_grad = mean ||grad f - grad t||^2.
// `grads` (optional) is overwritten with the parameter gradient.
double shape_loss_and_grads(const SirenStage& stage, const ShapeBatch& batch, double lambda, LayerStack* grads);

// Decoder output with everything needed for backpropagation.
struct DecodedField {
  DecoderTape tape;
  Grid raw;
  ComplexityField field;
};
DecodedField decode_with_tape(const WcfDecoder& decoder, const FeatureMap& features);

struct GeometryBatch {
  Eigen::Matrix2Xd coords;
  Eigen::RowVectorXd targets;
};

struct GeometryGrads {
  LayerStack stage;
  WcfDecoder decoder;
  std::vector<double> thresholds;  // d/d tau_tilde_1, then d/d delta_i
};

// Masked MSE of the geometry stage; gradients flow through the sigmoid
// masks into the thresholds, the instance norm and the decoder.
double geometry_loss_and_grads(const SirenStage& stage, const WcfDecoder& decoder, const ThresholdSet& ts,
                               const DecodedField& decoded, const GeometryBatch& batch, bool use_masks,
                               GeometryGrads* grads);

struct PhaseStats {
  int iterations = 0;
  double wall_ms = 0.0;
  double final_loss = 0.0;

  double ms_per_iter() const { return iterations > 0 ? wall_ms / iterations : 0.0; }
};

// normalize -> smooth -> half resolution (ceil(W/2) x ceil(H/2)).
Grid shape_target(const NormalizedTile& tile, double sigma);

SirenStage fit_shape(const Grid& target, const TrainConfig& cfg, PhaseStats* stats = nullptr);

// `residual` is the full-resolution normalized residual r (not yet scaled).
GeometryModel fit_geometry(const Grid& residual, const TrainConfig& cfg, PhaseStats* stats = nullptr);

struct FitResult {
  TerrainModel model;
  PhaseStats shape;
  PhaseStats geometry;
  FidelityReport report;
};

FitResult fit_tile(const DemTile& tile, const TrainConfig& cfg);

// End-to-end fidelity of a model against a tile; gradmae is measured on the
// shape stage against finite differences of the smoothed half-res target.
FidelityReport evaluate_model(const TerrainModel& model, const DemTile& tile, double sigma_smooth);

}  // namespace iterrain

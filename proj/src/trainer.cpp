#include "iterrain/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

#include "iterrain/adam.hpp"
#include "iterrain/wavelet.hpp"

namespace iterrain {

namespace {

constexpr Eigen::Index kChunk = 2048;

// Sub-seed streams.
enum : std::uint64_t {
  kShapeFreq = 1,
  kShapeInit = 2,
  kGeomFreq = 3,
  kGeomInit = 4,
  kDecoderInit = 5,
  kShapeBatches = 11,
  kGeomBatches = 12,
};

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

Vec2 node_xy(std::size_t idx, int w, int h) {
  const int col = static_cast<int>(idx % static_cast<std::size_t>(w));
  const int row = static_cast<int>(idx / static_cast<std::size_t>(w));
  return {node_coord(col, w), node_coord(row, h)};
}

std::size_t batch_count(double frac, std::size_t n) {
  if (frac >= 1.0) return n;
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(frac * static_cast<double>(n))));
}

std::vector<std::size_t> all_indices(std::size_t n) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  return idx;
}

void maybe_log(const TrainConfig& cfg, int iteration, int total, std::string_view phase, double loss,
               Clock::time_point start) {
  if (!cfg.log) return;
  const bool due = cfg.log_every > 0 && (iteration % cfg.log_every == 0);
  if (due || iteration == 1 || iteration == total) cfg.log({iteration, phase, loss, elapsed_ms(start)});
}

void check_finite(double loss, std::string_view phase, int iteration) {
  if (!std::isfinite(loss))
    throw NumericError(std::string(phase) + " training diverged at iteration " + std::to_string(iteration));
}

}  // namespace

std::string format_log_record(const LogRecord& rec) {
  std::ostringstream s;
  s.precision(9);
  s << "iter=" << rec.iteration << " phase=" << rec.phase << " loss=" << rec.loss << " wall_ms=" << rec.wall_ms;
  return s.str();
}

void TrainConfig::validate() const {
  auto frac_ok = [](double f) { return f > 0.0 && std::isfinite(f); };
  if (shape_iters < 1 || geom_iters < 0) throw ArgumentError("iteration counts must be positive");
  if (!frac_ok(shape_subsample_frac) || shape_subsample_frac > 1.0)
    throw ArgumentError("shape_subsample_frac must lie in (0, 1]");
  if (!frac_ok(geom_sample_frac)) throw ArgumentError("geom_sample_frac must be positive");
  if (alpha < 0.0 || alpha > 1.0) throw ArgumentError("alpha must lie in [0, 1]");
  if (!(eps_s > 0.0)) throw ArgumentError("eps_s must be positive");
  if (!(lr > 0.0)) throw ArgumentError("learning rate must be positive");
  if (lambda_grad < 0.0) throw ArgumentError("lambda_grad must be non-negative");
  if (grad_samples < 1) throw ArgumentError("grad_samples must be positive");
  if (!(sigma_smooth > 0.0)) throw ArgumentError("sigma_smooth must be positive");
  if (width < 1 || hidden_layers < 0) throw ArgumentError("bad network shape");
}

SirenStage initial_shape_stage(const TrainConfig& cfg) {
  auto freq = build_frequency_table(shape_frequency_config(derive_seed(cfg.init_seed, kShapeFreq)));
  return init_trainable(make_stage(std::move(freq), cfg.width, cfg.hidden_layers, cfg.omega0_shape),
                        derive_seed(cfg.init_seed, kShapeInit));
}

SirenStage initial_geometry_stage(const TrainConfig& cfg) {
  auto freq = build_frequency_table(geometry_frequency_config(derive_seed(cfg.init_seed, kGeomFreq)));
  return init_trainable(make_stage(std::move(freq), cfg.width, cfg.hidden_layers, cfg.omega0_geom),
                        derive_seed(cfg.init_seed, kGeomInit));
}

WcfDecoder initial_decoder(const TrainConfig& cfg) {
  return init_decoder(derive_seed(cfg.init_seed, kDecoderInit), cfg.decoder_channels);
}

double shape_loss_and_grads(const SirenStage& stage, const ShapeBatch& batch, double lambda, LayerStack* grads) {
  const Eigen::Index n_mse = batch.mse_coords.cols();
  const Eigen::Index n_grad = batch.grad_coords.cols();
  if (n_mse == 0) throw ArgumentError("shape batch has no value samples");
  if (grads != nullptr) *grads = stage.layers.zeros_like();
  StageTape tape;
  double mse = 0.0;
  for (Eigen::Index s = 0; s < n_mse; s += kChunk) {
    const Eigen::Index len = std::min(kChunk, n_mse - s);
    forward_tape(stage, batch.mse_coords.middleCols(s, len), nullptr, false, tape);
    const Eigen::RowVectorXd diff = tape.value - batch.mse_targets.segment(s, len);
    mse += diff.squaredNorm();
    if (grads != nullptr) {
      const Eigen::RowVectorXd adj = (2.0 / static_cast<double>(n_mse)) * diff;
      backward_tape(stage, tape, adj, nullptr, nullptr, *grads, nullptr);
    }
  }
  double loss = mse / static_cast<double>(n_mse);
  if (lambda == 0.0 || n_grad == 0) return loss;

  double gm = 0.0;
  for (Eigen::Index s = 0; s < n_grad; s += kChunk) {
    const Eigen::Index len = std::min(kChunk, n_grad - s);
    forward_tape(stage, batch.grad_coords.middleCols(s, len), nullptr, true, tape);
    const Eigen::RowVectorXd dx = tape.gx - batch.gx_targets.segment(s, len);
    const Eigen::RowVectorXd dy = tape.gy - batch.gy_targets.segment(s, len);
    gm += dx.squaredNorm() + dy.squaredNorm();
    if (grads != nullptr) {
      const double k = 2.0 * lambda / static_cast<double>(n_grad);
      const Eigen::RowVectorXd zero = Eigen::RowVectorXd::Zero(len);
      const Eigen::RowVectorXd ax = k * dx;
      const Eigen::RowVectorXd ay = k * dy;
      backward_tape(stage, tape, zero, &ax, &ay, *grads, nullptr);
    }
  }
  return loss + lambda * gm / static_cast<double>(n_grad);
}

DecodedField decode_with_tape(const WcfDecoder& decoder, const FeatureMap& features) {
  DecodedField d;
  d.raw = decode_raw(decoder, features, &d.tape);
  d.field = instance_normalize(d.raw);
  return d;
}

double geometry_loss_and_grads(const SirenStage& stage, const WcfDecoder& decoder, const ThresholdSet& ts,
                               const DecodedField& decoded, const GeometryBatch& batch, bool use_masks,
                               GeometryGrads* grads) {
  const Eigen::Index total = batch.coords.cols();
  if (total == 0) throw ArgumentError("geometry batch is empty");
  const auto& field = decoded.field;
  const std::vector<double> taus = ts.taus();
  const int k_bands = ts.count();
  const FrequencyTable& freq = stage.freq;
  if (use_masks && freq.band_count - 1 > k_bands) throw ArgumentError("fewer thresholds than high bands");

  Grid c_hat_adj;
  std::vector<double> tau_adj(static_cast<std::size_t>(k_bands), 0.0);
  if (grads != nullptr) {
    grads->stage = stage.layers.zeros_like();
    grads->decoder = decoder.zeros_like();
    grads->thresholds.assign(static_cast<std::size_t>(k_bands), 0.0);
    c_hat_adj = Grid(field.width(), field.height());
  }

  StageTape tape;
  Eigen::MatrixXd masks, mask_adj;
  std::vector<Bilinear> stencils;
  Eigen::MatrixXd band_m;  // K x len
  double sse = 0.0;
  for (Eigen::Index s = 0; s < total; s += kChunk) {
    const Eigen::Index len = std::min(kChunk, total - s);
    const Eigen::Matrix2Xd coords = batch.coords.middleCols(s, len);
    if (use_masks) {
      stencils.resize(static_cast<std::size_t>(len));
      band_m.resize(k_bands, len);
      masks.resize(freq.size(), len);
      for (Eigen::Index j = 0; j < len; ++j) {
        const Bilinear b = bilinear_stencil(field.width(), field.height(), {coords(0, j), coords(1, j)});
        stencils[static_cast<std::size_t>(j)] = b;
        double c = 0.0;
        for (int q = 0; q < 4; ++q) c += b.weight[q] * field.c_hat.values[b.index[q]];
        for (int k = 0; k < k_bands; ++k) band_m(k, j) = sigmoid(c - taus[static_cast<std::size_t>(k)]);
        for (int i = 0; i < freq.size(); ++i) {
          const int band = freq.band_of[static_cast<std::size_t>(i)];
          masks(i, j) = band == 0 ? 1.0 : band_m(band - 1, j);
        }
      }
      forward_tape(stage, coords, &masks, false, tape);
    } else {
      forward_tape(stage, coords, nullptr, false, tape);
    }
    const Eigen::RowVectorXd diff = tape.value - batch.targets.segment(s, len);
    sse += diff.squaredNorm();
    if (grads == nullptr) continue;

    const Eigen::RowVectorXd adj = (2.0 / static_cast<double>(total)) * diff;
    backward_tape(stage, tape, adj, nullptr, nullptr, grads->stage, use_masks ? &mask_adj : nullptr);
    if (!use_masks) continue;
    for (Eigen::Index j = 0; j < len; ++j) {
      std::vector<double> dm(static_cast<std::size_t>(k_bands), 0.0);
      for (int i = 0; i < freq.size(); ++i) {
        const int band = freq.band_of[static_cast<std::size_t>(i)];
        if (band > 0) dm[static_cast<std::size_t>(band - 1)] += mask_adj(i, j);
      }
      double dc = 0.0;
      for (int k = 0; k < k_bands; ++k) {
        const double m = band_m(k, j);
        const double dz = dm[static_cast<std::size_t>(k)] * m * (1.0 - m);
        dc += dz;
        tau_adj[static_cast<std::size_t>(k)] -= dz;
      }
      const Bilinear& b = stencils[static_cast<std::size_t>(j)];
      for (int q = 0; q < 4; ++q) c_hat_adj.values[b.index[q]] += b.weight[q] * dc;
    }
  }

  if (grads != nullptr && use_masks) {
    grads->thresholds = thresholds_backward(ts, tau_adj);
    const Grid raw_adj = instance_normalize_backward(decoded.raw, field, c_hat_adj);
    decode_backward(decoder, decoded.tape, raw_adj, grads->decoder);
  }
  return sse / static_cast<double>(total);
}

Grid shape_target(const NormalizedTile& tile, double sigma) {
  const Grid smooth = gaussian_smooth(tile, sigma).grid;
  return resample_bilinear(smooth, (tile.width() + 1) / 2, (tile.height() + 1) / 2);
}

SirenStage fit_shape(const Grid& target, const TrainConfig& cfg, PhaseStats* stats) {
  cfg.validate();
  if (target.width < 3 || target.height < 3) throw ArgumentError("shape target must be at least 3x3");
  const auto start = Clock::now();
  SirenStage stage = initial_shape_stage(cfg);
  const GradientGrid tgrad = finite_diff_gradients(target);
  const int w = target.width;
  const int h = target.height;
  const std::size_t n = target.size();
  const std::size_t n_mse = batch_count(cfg.shape_subsample_frac, n);
  const std::size_t n_grad = std::min(n, static_cast<std::size_t>(cfg.grad_samples));
  const bool use_gm = cfg.lambda_grad > 0.0;

  Rng rng(derive_seed(cfg.sample_seed, kShapeBatches));
  std::vector<double> params(stage.layers.parameter_count());
  std::vector<double> gvec(params.size());
  AdamState adam(params.size());
  const AdamConfig acfg{cfg.lr};
  stage.layers.gather(params);
  LayerStack grads;
  ShapeBatch batch;
  batch.mse_coords.resize(2, static_cast<Eigen::Index>(n_mse));
  batch.mse_targets.resize(static_cast<Eigen::Index>(n_mse));
  if (use_gm) {
    batch.grad_coords.resize(2, static_cast<Eigen::Index>(n_grad));
    batch.gx_targets.resize(static_cast<Eigen::Index>(n_grad));
    batch.gy_targets.resize(static_cast<Eigen::Index>(n_grad));
  }
  double loss = 0.0;
  for (int it = 1; it <= cfg.shape_iters; ++it) {
    const auto mse_idx = n_mse == n ? all_indices(n) : sample_without_replacement(n, n_mse, rng);
    for (std::size_t j = 0; j < n_mse; ++j) {
      const Vec2 xy = node_xy(mse_idx[j], w, h);
      batch.mse_coords(0, static_cast<Eigen::Index>(j)) = xy[0];
      batch.mse_coords(1, static_cast<Eigen::Index>(j)) = xy[1];
      batch.mse_targets(static_cast<Eigen::Index>(j)) = target.values[mse_idx[j]];
    }
    if (use_gm) {
      const auto gidx = n_grad == n ? all_indices(n) : sample_without_replacement(n, n_grad, rng);
      for (std::size_t j = 0; j < n_grad; ++j) {
        const Vec2 xy = node_xy(gidx[j], w, h);
        const auto J = static_cast<Eigen::Index>(j);
        batch.grad_coords(0, J) = xy[0];
        batch.grad_coords(1, J) = xy[1];
        batch.gx_targets(J) = tgrad.gx.values[gidx[j]];
        batch.gy_targets(J) = tgrad.gy.values[gidx[j]];
      }
    }
    loss = shape_loss_and_grads(stage, batch, use_gm ? cfg.lambda_grad : 0.0, &grads);
    check_finite(loss, "shape", it);
    grads.gather(gvec);
    adam_step(params, gvec, adam, acfg);
    stage.layers.scatter(params);
    maybe_log(cfg, it, cfg.shape_iters, "shape", loss, start);
  }
  if (stats != nullptr) *stats = {cfg.shape_iters, elapsed_ms(start), loss};
  return stage;
}

GeometryModel fit_geometry(const Grid& residual, const TrainConfig& cfg, PhaseStats* stats) {
  cfg.validate();
  const auto start = Clock::now();
  const int w = residual.width;
  const int h = residual.height;
  const std::size_t n = residual.size();

  double rho = 0.0;
  for (double v : residual.values) rho = std::max(rho, std::abs(v));
  if (!std::isfinite(rho)) throw NumericError("residual is not finite");
  if (rho == 0.0) rho = 1.0;
  Grid target = residual;
  for (auto& v : target.values) v /= rho;

  GeometryModel geom;
  geom.stage = initial_geometry_stage(cfg);
  geom.decoder = initial_decoder(cfg);
  geom.thresholds = default_thresholds(std::max(1, geom.stage.freq.band_count - 1));
  geom.residual_scale = rho;
  geom.masked = cfg.use_masks;
  const SwtFeatures swt = build_features(target);
  const FeatureMap features = to_feature_map(swt);

  const std::size_t n_stage = geom.stage.layers.parameter_count();
  const std::size_t n_dec = geom.decoder.parameter_count();
  const std::size_t n_thr = static_cast<std::size_t>(geom.thresholds.count());
  // Masks off: decoder and thresholds receive no gradient and stay at init.
  const std::size_t n_params = cfg.use_masks ? n_stage + n_dec + n_thr : n_stage;
  std::vector<double> params(n_params), gvec(n_params);
  auto gather_all = [&](std::vector<double>& v, const LayerStack& s, const WcfDecoder* d,
                        const std::vector<double>* t) {
    s.gather(std::span<double>(v).subspan(0, n_stage));
    if (!cfg.use_masks) return;
    d->gather(std::span<double>(v).subspan(n_stage, n_dec));
    std::copy(t->begin(), t->end(), v.begin() + static_cast<std::ptrdiff_t>(n_stage + n_dec));
  };
  std::vector<double> thr(n_thr);
  auto thresholds_to_vec = [&]() {
    thr[0] = geom.thresholds.tau_tilde_1;
    std::copy(geom.thresholds.deltas.begin(), geom.thresholds.deltas.end(), thr.begin() + 1);
  };
  thresholds_to_vec();
  gather_all(params, geom.stage.layers, &geom.decoder, &thr);

  Rng rng(derive_seed(cfg.sample_seed, kGeomBatches));
  const bool full_grid = cfg.geom_sample_frac >= 1.0;
  const std::size_t n_samples = batch_count(cfg.geom_sample_frac, n);
  AdamState adam(n_params);
  const AdamConfig acfg{cfg.lr};
  GeometryBatch batch;
  batch.coords.resize(2, static_cast<Eigen::Index>(n_samples));
  batch.targets.resize(static_cast<Eigen::Index>(n_samples));
  if (full_grid) {
    for (std::size_t j = 0; j < n; ++j) {
      const Vec2 xy = node_xy(j, w, h);
      batch.coords(0, static_cast<Eigen::Index>(j)) = xy[0];
      batch.coords(1, static_cast<Eigen::Index>(j)) = xy[1];
      batch.targets(static_cast<Eigen::Index>(j)) = target.values[j];
    }
  }
  GeometryGrads grads;
  double loss = 0.0;
  for (int it = 1; it <= cfg.geom_iters; ++it) {
    const DecodedField decoded = decode_with_tape(geom.decoder, features);
    if (!full_grid) {
      std::vector<std::size_t> idx;
      if (cfg.alpha > 0.0) {
        const auto p = sampling_distribution(decoded.field, cfg.alpha, cfg.eps_s, w, h);
        idx = draw_samples(p, n_samples, rng);
      } else {
        idx.resize(n_samples);
        for (auto& i : idx) i = static_cast<std::size_t>(rng.below(n));
      }
      for (std::size_t j = 0; j < n_samples; ++j) {
        const Vec2 xy = node_xy(idx[j], w, h);
        batch.coords(0, static_cast<Eigen::Index>(j)) = xy[0];
        batch.coords(1, static_cast<Eigen::Index>(j)) = xy[1];
        batch.targets(static_cast<Eigen::Index>(j)) = target.values[idx[j]];
      }
    }
    loss = geometry_loss_and_grads(geom.stage, geom.decoder, geom.thresholds, decoded, batch, cfg.use_masks,
                                   &grads);
    check_finite(loss, "geometry", it);
    gather_all(gvec, grads.stage, &grads.decoder, &grads.thresholds);
    adam_step(params, gvec, adam, acfg);
    geom.stage.layers.scatter(std::span<const double>(params).subspan(0, n_stage));
    if (cfg.use_masks) {
      geom.decoder.scatter(std::span<const double>(params).subspan(n_stage, n_dec));
      geom.thresholds.tau_tilde_1 = params[n_stage + n_dec];
      for (std::size_t i = 1; i < n_thr; ++i) geom.thresholds.deltas[i - 1] = params[n_stage + n_dec + i];
    }
    maybe_log(cfg, it, cfg.geom_iters, "geometry", loss, start);
  }
  geom.field = decode_complexity(geom.decoder, swt);
  if (stats != nullptr) *stats = {cfg.geom_iters, elapsed_ms(start), loss};
  return geom;
}

FidelityReport evaluate_model(const TerrainModel& model, const DemTile& tile, double sigma_smooth) {
  const NormalizedTile norm = normalize(tile);
  FidelityReport r;
  const Grid recon = reconstruct(model, tile.width(), tile.height());
  r.psnr_db = psnr(recon, norm.grid);
  const AbsErrors e = mae_maxae(recon, norm.grid, norm.z_max - norm.z_min);
  r.mae_m = e.mae;
  r.maxae_m = e.maxae;
  const Grid target = shape_target(norm, sigma_smooth);
  r.gradmae = grad_mae(stage_gradients(model.shape, target.width, target.height), finite_diff_gradients(target));
  return r;
}

FitResult fit_tile(const DemTile& tile, const TrainConfig& cfg) {
  cfg.validate();
  if (!tile.trainable()) throw DataError("tile is not trainable (constant elevation or smaller than 16x16)");
  const NormalizedTile norm = normalize(tile);
  FitResult out;
  out.model.meta = {tile.width(), tile.height(), tile.z_min, tile.z_max, tile.cell_size};
  out.model.shape = fit_shape(shape_target(norm, cfg.sigma_smooth), cfg, &out.shape);
  if (cfg.geom_iters > 0) {
    Grid residual = stage_grid(out.model.shape, tile.width(), tile.height());
    for (std::size_t i = 0; i < residual.size(); ++i) residual.values[i] = norm.grid.values[i] - residual.values[i];
    out.model.geometry = fit_geometry(residual, cfg, &out.geometry);
  }
  out.report = evaluate_model(out.model, tile, cfg.sigma_smooth);
  out.report.timings_ms = {{"shape", out.shape.wall_ms},
                           {"geometry", out.geometry.wall_ms},
                           {"total", out.shape.wall_ms + out.geometry.wall_ms}};
  return out;
}

}  // namespace iterrain

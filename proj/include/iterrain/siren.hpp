#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "iterrain/common.hpp"

namespace iterrain {

// How to draw the frozen first layer. Band 0 holds rows with
// ||w||_inf <= low_limit; band k >= 1 holds rows with
// band_edges[k-2] < ||w||_inf <= band_edges[k-1] (band_edges[-1] = low_limit).
struct FrequencyConfig {
  std::uint64_t seed = 0;
  int low_limit = 10;
  std::vector<int> band_edges;  // K upper edges; the last one is the bandlimit
  std::vector<int> band_sizes;  // K + 1 neuron counts

  int neuron_count() const;
  int high_bands() const { return static_cast<int>(band_edges.size()); }
  int bandlimit() const { return band_edges.empty() ? low_limit : band_edges.back(); }
  bool operator==(const FrequencyConfig&) const = default;
};

// 128 low-frequency rows, ||w||_inf <= 10, no high bands.
FrequencyConfig shape_frequency_config(std::uint64_t seed);
// 64 rows at ||w||_inf <= 6, then 16 rows in each of (6,14], (14,22], (22,31], (31,40].
FrequencyConfig geometry_frequency_config(std::uint64_t seed);

struct FrequencyTable {
  std::vector<std::array<int, 2>> rows;  // integer cycles over the unit domain
  std::vector<double> phases;            // [0, 2 pi)
  std::vector<int> band_of;
  int band_count = 1;                    // K + 1
  std::optional<FrequencyConfig> source; // set when regenerated from a seed

  int size() const { return static_cast<int>(rows.size()); }
  std::vector<int> band_sizes() const;
};

// Uniform draws without replacement from the half-lattice
// {w != 0 : w_x > 0 or (w_x == 0 and w_y > 0)} restricted to each band's annulus.
FrequencyTable build_frequency_table(const FrequencyConfig& config);

// A hand-specified table (tests, closed-form fields).
FrequencyTable explicit_frequency_table(std::vector<std::array<int, 2>> rows, std::vector<double> phases,
                                        std::vector<int> band_of);

struct DenseLayer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;
};

// Trainable parameters of a stage; doubles as the gradient container.
struct LayerStack {
  std::vector<DenseLayer> hidden;
  DenseLayer output;  // 1 x width

  std::size_t parameter_count() const;
  void gather(std::span<double> out) const;
  void scatter(std::span<const double> in);
  void set_zero();
  LayerStack zeros_like() const;
};

// Frozen frequency layer, sine hidden layers sin(omega0 (W h + b)), linear output.
struct SirenStage {
  FrequencyTable freq;
  double omega0 = 30.0;
  LayerStack layers;

  int input_size() const { return freq.size(); }
  int hidden_count() const { return static_cast<int>(layers.hidden.size()); }
  int width() const;
};

// Shapes every layer for (n -> width x hidden_layers -> 1); parameters zero.
SirenStage make_stage(FrequencyTable freq, int width, int hidden_layers, double omega0);

// Weights U(-sqrt(6/fan_in)/omega0, +sqrt(6/fan_in)/omega0), biases zero.
SirenStage init_trainable(SirenStage stage, std::uint64_t seed);

using Hessian2 = std::array<std::array<double, 2>, 2>;

struct EvalResult {
  double value = 0.0;
  Vec2 grad{0.0, 0.0};
  std::optional<Hessian2> hessian;
};

enum class EvalMode { value, value_grad };

// Queries slightly outside the tile are tolerated so root finding near the
// border does not fail; anything beyond this margin is rejected.
constexpr double kDomainMargin = 0.1;
void check_domain(Vec2 xy);

// `mask` holds one gain per first-layer neuron; empty means all ones.
double forward(const SirenStage& stage, Vec2 xy, std::span<const double> mask = {});
EvalResult eval_with_grad(const SirenStage& stage, Vec2 xy, std::span<const double> mask = {});
EvalResult eval_with_hessian(const SirenStage& stage, Vec2 xy, std::span<const double> mask = {});

// `masks` is n x coords.size() (one column per coordinate) or empty for all ones.
std::vector<EvalResult> batch_eval(const SirenStage& stage, std::span<const Vec2> coords,
                                   const Eigen::MatrixXd& masks, EvalMode mode);
std::vector<EvalResult> batch_eval(const SirenStage& stage, std::span<const Vec2> coords, EvalMode mode);
std::vector<EvalResult> batch_eval_hessian(const SirenStage& stage, std::span<const Vec2> coords,
                                           const Eigen::MatrixXd& masks = Eigen::MatrixXd());

// ---------------------------------------------------------------------------
// Batched forward/backward used by the trainer. Columns are samples.

struct StageTape {
  Eigen::MatrixXd first_sin;             // sin of first-layer phase, unmasked
  Eigen::MatrixXd first_cos;
  Eigen::MatrixXd mask;                  // empty when unmasked
  std::vector<Eigen::MatrixXd> act;      // act[0] masked first layer, act[l+1] = sin(pre_l)
  std::vector<Eigen::MatrixXd> cos_pre;  // cos(pre_l)
  bool tangents = false;
  std::vector<Eigen::MatrixXd> jx, jy;   // d act / dx, d act / dy
  std::vector<Eigen::MatrixXd> tx, ty;   // d pre_l / dx, d pre_l / dy
  Eigen::RowVectorXd value, gx, gy;

  Eigen::Index batch() const { return value.size(); }
};

void forward_tape(const SirenStage& stage, const Eigen::Matrix2Xd& coords, const Eigen::MatrixXd* mask,
                  bool tangents, StageTape& tape);

// Accumulates parameter gradients for the adjoints of value and, when the tape
// carries tangents, of the input gradient. `mask_adjoint` (n x B) receives the
// adjoint of the first-layer gains when non-null.
void backward_tape(const SirenStage& stage, const StageTape& tape, const Eigen::RowVectorXd& value_adjoint,
                   const Eigen::RowVectorXd* gx_adjoint, const Eigen::RowVectorXd* gy_adjoint,
                   LayerStack& grads, Eigen::MatrixXd* mask_adjoint);

Eigen::Matrix2Xd to_matrix(std::span<const Vec2> coords);

}  // namespace iterrain

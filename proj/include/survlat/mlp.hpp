#pragma once

#include <optional>
#include <vector>

#include "survlat/numerics.hpp"

namespace survlat {

enum class Activation { Linear, Relu };
enum class MlpMode { Train, Eval };

struct BatchNorm {
  std::vector<double> scale;         // gamma
  std::vector<double> shift;         // beta
  std::vector<double> running_mean;
  std::vector<double> running_var;
};

inline constexpr double kBatchNormMomentum = 0.9;
inline constexpr double kBatchNormEpsilon = 1e-5;

struct MlpLayer {
  Matrix weights;            // input_dim x output_dim
  std::vector<double> bias;  // output_dim
  std::optional<BatchNorm> batch_norm;
  Activation activation = Activation::Linear;
  bool dropout = false;  // apply the network dropout rate after this layer
};

struct MlpNetwork {
  std::vector<MlpLayer> layers;
  double dropout_rate = 0.0;
  MlpMode mode = MlpMode::Eval;

  std::size_t input_dim() const { return layers.front().weights.rows; }
  std::size_t output_dim() const { return layers.back().weights.cols; }
};

// The 6-layer survival network topology: batch norm + ReLU + dropout on
// hidden layers, plain linear scalar output. Weights drawn scaled-uniform
// (fan-in) from the rng.
MlpNetwork make_survival_mlp(std::size_t input_dim,
                             const std::vector<std::size_t>& hidden_widths,
                             double dropout_rate, Rng& rng);

struct LayerCache {
  Matrix input;          // a
  Matrix pre_norm;       // z = a W + b
  std::vector<double> batch_mean;
  std::vector<double> batch_var;
  Matrix normalized;     // xhat
  Matrix pre_activation; // y = gamma xhat + beta (z when no batch norm)
  Matrix activated;
  Matrix dropout_mask;   // empty when dropout off; entries 0 or 1/(1-rate)
};

struct MlpCache {
  std::vector<LayerCache> layers;
  MlpMode mode = MlpMode::Eval;
};

struct MlpForwardResult {
  Matrix output;  // n x output_dim
  MlpCache cache;
};

// Affine -> batch norm -> activation -> dropout per layer. Train mode uses
// batch statistics, inverted dropout, and updates running statistics in
// place; eval mode uses running statistics and ignores the rng.
MlpForwardResult mlp_forward(MlpNetwork& net, const Matrix& batch, Rng& rng);

struct LayerGradients {
  Matrix weights;
  std::vector<double> bias;
  std::vector<double> scale;  // empty when no batch norm
  std::vector<double> shift;
};

struct MlpGradients {
  std::vector<LayerGradients> layers;
};

// Exact gradients of the train-mode forward pass, including the batch-norm
// batch-statistics terms. Requires a train-mode cache.
MlpGradients mlp_backward(const MlpNetwork& net, const MlpCache& cache,
                          const Matrix& dloss_doutput);

// Flat parameter vector in layer order: weights (row-major), bias, then
// batch-norm scale and shift where present. Running statistics are state,
// not parameters.
std::vector<double> mlp_parameters(const MlpNetwork& net);
void set_mlp_parameters(MlpNetwork& net, std::span<const double> params);
std::vector<double> flatten_gradients(const MlpGradients& grads);

}  // namespace survlat

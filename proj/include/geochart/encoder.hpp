#pragma once

// Fully-connected Siamese encoder mapping a flattened aligned tensor to a
// 2-D chart point, trained so chart distances match geodesic distances.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "geochart/csi.hpp"
#include "geochart/graph.hpp"

namespace geochart::chart {

struct EncoderShape {
  int input = 0;
  std::vector<int> hidden{256, 128, 64};
  int output = 2;
};

struct DenseLayer {
  Eigen::MatrixXd weight;  // [out x in]
  Eigen::VectorXd bias;    // [out]
};

/// Rectifier on hidden layers, identity on the output layer. Inputs are
/// divided by `input_scale`, outputs multiplied by `output_scale`.
struct EncoderParams {
  std::vector<DenseLayer> layers;
  double input_scale = 1.0;
  double output_scale = 1.0;

  int input_size() const { return layers.empty() ? 0 : static_cast<int>(layers.front().weight.cols()); }
  int output_size() const { return layers.empty() ? 0 : static_cast<int>(layers.back().weight.rows()); }
  std::size_t num_parameters() const;
  bool all_finite() const;

  /// Parameters flattened layer by layer (weights column-major, then bias).
  std::vector<double> flatten() const;
  void assign(std::span<const double> flat);
};

/// Parameter gradients laid out like EncoderParams::layers.
using Gradients = std::vector<DenseLayer>;

std::vector<double> flatten_layers(const std::vector<DenseLayer>& layers);

EncoderParams init_encoder(const EncoderShape& shape, std::uint64_t seed);

Vec2 forward(const EncoderParams& p, std::span<const double> x);
Vec2 forward(const EncoderParams& p, const csi::AlignedTensor& x);

/// Forward pass over the columns of `inputs` ([input x batch]); returns [2 x batch].
Eigen::MatrixXd forward_batch(const EncoderParams& p, const Eigen::MatrixXd& inputs);

struct StepResult {
  double loss = 0.0;
  Gradients grad;
};

/// Loss |d_target - ||f(x_i) - f(x_j)|| | and its gradient through both branches.
StepResult siamese_step(const EncoderParams& p, std::span<const double> x_i, std::span<const double> x_j,
                        double d_target);

struct TrainConfig {
  int epochs = 200;
  int pairs_per_epoch = 4096;
  int batch_size = 64;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 1;
  std::vector<int> hidden{256, 128, 64};
  /// Early stop when the epoch-mean loss improves by less than this fraction
  /// over `patience` epochs. Zero patience disables it.
  double min_improvement = 1e-3;
  int patience = 10;
  /// Divide inputs by the dataset-wide maximum magnitude.
  bool normalize_inputs = true;

  void validate() const;
};

struct TrainResult {
  EncoderParams params;
  std::vector<double> loss_history;  // epoch means
  int epochs_run = 0;
};

/// Stacks tensors column-wise into [input x N].
Eigen::MatrixXd stack_inputs(const std::vector<csi::AlignedTensor>& tensors);

TrainResult train(const std::vector<csi::AlignedTensor>& tensors, const graph::DistanceMatrix& geodesic,
                  const TrainConfig& cfg);

/// As above, continuing from given initial parameters.
TrainResult train(const Eigen::MatrixXd& inputs, const graph::DistanceMatrix& geodesic, const TrainConfig& cfg,
                  EncoderParams initial);

struct Embedding {
  std::vector<Vec2> points;
  std::string method;
};

Embedding embed_dataset(const EncoderParams& p, const std::vector<csi::AlignedTensor>& tensors);

}  // namespace geochart::chart

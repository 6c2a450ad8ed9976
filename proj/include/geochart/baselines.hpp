#pragma once

// Classical channel-chart baselines: PCA on the aligned tensors, SMACOF
// stress majorization (Isomap-style when fed geodesic distances) and Sammon
// mapping.

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "geochart/encoder.hpp"
#include "geochart/graph.hpp"

namespace geochart::chart {

struct EigenPairs {
  Eigen::VectorXd values;   // descending
  Eigen::MatrixXd vectors;  // columns match values
};

/// Algebraically largest `count` eigenpairs of a symmetric matrix. Dense
/// solve for small matrices, shifted subspace iteration otherwise.
EigenPairs top_eigenpairs(const Eigen::MatrixXd& symmetric, int count, std::uint64_t seed = 0);

struct PcaModel {
  Eigen::VectorXd mean;
  Eigen::MatrixXd directions;  // [dim x 2]
  Eigen::Vector2d variances;
};

/// Fits the top-2 principal directions of the columns of `inputs` ([dim x N]).
PcaModel fit_pca(const Eigen::MatrixXd& inputs);
std::vector<Vec2> pca_project(const PcaModel& model, const Eigen::MatrixXd& inputs);

Embedding pca_embed(const std::vector<csi::AlignedTensor>& tensors);

/// Torgerson scaling of a distance matrix into 2-D.
std::vector<Vec2> classical_scaling(const graph::DistanceMatrix& d, std::uint64_t seed = 0);

struct MdsConfig {
  int max_iterations = 300;
  double tolerance = 1e-9;  // relative stress decrease that ends the run
  std::uint64_t seed = 1;
  bool classical_init = true;
};

struct MdsResult {
  Embedding embedding;
  std::vector<double> stress_history;  // raw stress, one entry per iterate incl. the initial one
};

/// Raw stress sum_{i<j} (D_ij - ||z_i - z_j||)^2.
double raw_stress(const graph::DistanceMatrix& d, const std::vector<Vec2>& points);

MdsResult mds_embed(const graph::DistanceMatrix& d, const MdsConfig& cfg = {});

struct SammonConfig {
  int max_iterations = 300;
  int max_halvings = 20;
  double tolerance = 1e-9;
  std::uint64_t seed = 1;
};

struct SammonResult {
  Embedding embedding;
  std::vector<double> stress_history;  // normalized Sammon stress per accepted iterate
};

/// Sammon stress (1 / sum D) * sum_{i<j} (D_ij - d_ij)^2 / D_ij, with zero
/// off-diagonal targets floored.
double sammon_stress(const graph::DistanceMatrix& d, const std::vector<Vec2>& points);

SammonResult sammon_embed(const graph::DistanceMatrix& d, const SammonConfig& cfg = {});

/// Places each query at the inverse-distance weighted mean of its k nearest
/// reference chart points. `cross` is [queries x references] row-major.
std::vector<Vec2> extend_out_of_sample(const std::vector<Vec2>& reference_points, const std::vector<double>& cross,
                                       int k);

}  // namespace geochart::chart

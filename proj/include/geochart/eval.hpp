#pragma once

// Chart quality: rank-based continuity / trustworthiness, least-squares
// affine registration to ground truth, and positioning error statistics.

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "geochart/encoder.hpp"
#include "geochart/graph.hpp"

namespace geochart::eval {

/// Maps homogeneous chart coordinates (z_x, z_y, 1) to world coordinates.
struct AffineTransform {
  std::array<std::array<double, 3>, 2> m{{{1.0, 0.0, 0.0}, {0.0, 1.0, 0.0}}};

  Vec2 apply(Vec2 z) const {
    return {m[0][0] * z.x + m[0][1] * z.y + m[0][2], m[1][0] * z.x + m[1][1] * z.y + m[1][2]};
  }
  std::vector<Vec2> apply(const std::vector<Vec2>& pts) const;
  bool finite() const;
};

struct EvalReport {
  std::string method;
  std::string split;
  double ct = 0.0;
  double tw = 0.0;
  int k_neighbors = 0;
  double mae = 0.0;
  double ce90 = 0.0;
  AffineTransform transform;
  int n = 0;
  /// Continuity / trustworthiness against ground-truth Euclidean distances.
  std::optional<double> ct_ground_truth;
  std::optional<double> tw_ground_truth;
};

/// floor(0.05 N), at least 1.
int default_k(int n);

/// Ranks of all other points by distance from `i` (1 = nearest, ties by
/// index); rank[i] is 0.
std::vector<int> neighbor_ranks(const graph::DistanceMatrix& d, int i);

double continuity(const graph::DistanceMatrix& original, const graph::DistanceMatrix& embedded, int k);
double trustworthiness(const graph::DistanceMatrix& original, const graph::DistanceMatrix& embedded, int k);

AffineTransform fit_affine(const std::vector<Vec2>& chart, const std::vector<Vec2>& ground_truth);

struct PositionErrors {
  double mae = 0.0;
  double ce90 = 0.0;
  std::vector<double> errors;
};

/// Linear-interpolated empirical percentile, q in [0, 1].
double percentile(std::vector<double> values, double q);

PositionErrors position_errors(const std::vector<Vec2>& chart, const AffineTransform& transform,
                               const std::vector<Vec2>& ground_truth);

/// Pearson correlation coefficient; 0 when either side has zero variance.
double pearson(std::span<const double> x, std::span<const double> y);

/// Full report for one chart. `original` is the original-space matrix used for
/// CT/TW (pairwise CIR distances); the transform is fitted elsewhere.
EvalReport evaluate(const chart::Embedding& chart, const graph::DistanceMatrix& original,
                    const std::vector<Vec2>& ground_truth, const AffineTransform& transform, int k = 0);

}  // namespace geochart::eval

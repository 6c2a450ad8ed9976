#pragma once

// Pairwise CIR distance matrices, k-nearest-neighbour graphs and geodesic
// (shortest-path) distances over them.

#include <string>
#include <vector>

#include "geochart/csi.hpp"

namespace geochart::graph {

enum class MatrixKind { Pairwise, Geodesic, Euclidean };

std::string to_string(MatrixKind kind);
MatrixKind matrix_kind_from_string(const std::string& s);

/// Symmetric N x N matrix with zero diagonal, stored row-major at 64 bits.
class DistanceMatrix {
public:
  DistanceMatrix() = default;
  DistanceMatrix(int n, MatrixKind kind) : n_(n), kind_(kind), values_(static_cast<std::size_t>(n) * n, 0.0) {}
  DistanceMatrix(int n, MatrixKind kind, std::vector<double> values);

  int size() const { return n_; }
  MatrixKind kind() const { return kind_; }
  double operator()(int i, int j) const { return values_[index(i, j)]; }
  /// Sets both (i, j) and (j, i).
  void set(int i, int j, double v) {
    values_[index(i, j)] = v;
    values_[index(j, i)] = v;
  }
  const std::vector<double>& values() const { return values_; }
  const double* row(int i) const { return values_.data() + static_cast<std::size_t>(i) * n_; }

  /// Throws unless symmetric, non-negative, finite with a zero diagonal.
  void validate() const;

private:
  std::size_t index(int i, int j) const { return static_cast<std::size_t>(i) * n_ + j; }

  int n_ = 0;
  MatrixKind kind_ = MatrixKind::Pairwise;
  std::vector<double> values_;
};

struct Edge {
  int to = 0;
  double weight = 0.0;
};

struct NeighborGraph {
  int n = 0;
  int k = 0;
  std::vector<std::vector<Edge>> adjacency;  // sorted by neighbour id

  std::size_t num_edges() const;
  bool has_edge(int i, int j) const;
};

DistanceMatrix pairwise_matrix(const std::vector<csi::AlignedTensor>& tensors);

/// Euclidean distances between 2-D points (ground truth or chart coordinates).
DistanceMatrix euclidean_matrix(const std::vector<Vec2>& points);

/// Union-symmetrized k-nearest-neighbour graph; ties resolved by lower index.
NeighborGraph knn_graph(const DistanceMatrix& d, int k);

/// Components in ascending order of their smallest node; nodes sorted.
std::vector<std::vector<int>> connected_components(const NeighborGraph& g);

/// All-pairs shortest paths by one binary-heap Dijkstra run per source.
DistanceMatrix geodesic_matrix(const NeighborGraph& g);

/// Smallest k for which knn_graph(d, k) is connected.
int minimal_connecting_k(const DistanceMatrix& d);

}  // namespace geochart::graph

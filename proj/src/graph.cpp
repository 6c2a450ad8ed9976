#include "geochart/graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>
#include <sstream>

namespace geochart::graph {

std::string to_string(MatrixKind kind) {
  switch (kind) {
    case MatrixKind::Pairwise: return "pairwise";
    case MatrixKind::Geodesic: return "geodesic";
    case MatrixKind::Euclidean: return "euclidean";
  }
  return "pairwise";
}

MatrixKind matrix_kind_from_string(const std::string& s) {
  if (s == "pairwise") return MatrixKind::Pairwise;
  if (s == "geodesic") return MatrixKind::Geodesic;
  if (s == "euclidean") return MatrixKind::Euclidean;
  throw Error("unknown matrix kind '" + s + "'");
}

DistanceMatrix::DistanceMatrix(int n, MatrixKind kind, std::vector<double> values)
    : n_(n), kind_(kind), values_(std::move(values)) {
  if (values_.size() != static_cast<std::size_t>(n) * n) {
    throw Error("distance matrix buffer holds " + std::to_string(values_.size()) + " values, expected " +
                std::to_string(static_cast<std::size_t>(n) * n));
  }
}

void DistanceMatrix::validate() const {
  for (int i = 0; i < n_; ++i) {
    if ((*this)(i, i) != 0.0) throw Error("nonzero diagonal at " + std::to_string(i));
    for (int j = i + 1; j < n_; ++j) {
      const double v = (*this)(i, j);
      if (!std::isfinite(v) || v < 0.0) {
        throw Error("invalid distance at (" + std::to_string(i) + ", " + std::to_string(j) + ")");
      }
      if (v != (*this)(j, i)) throw Error("asymmetric entry at (" + std::to_string(i) + ", " + std::to_string(j) + ")");
    }
  }
}

std::size_t NeighborGraph::num_edges() const {
  std::size_t twice = 0;
  for (const auto& a : adjacency) twice += a.size();
  return twice / 2;
}

bool NeighborGraph::has_edge(int i, int j) const {
  const auto& a = adjacency[i];
  auto it = std::lower_bound(a.begin(), a.end(), j, [](const Edge& e, int id) { return e.to < id; });
  return it != a.end() && it->to == j;
}

DistanceMatrix pairwise_matrix(const std::vector<csi::AlignedTensor>& tensors) {
  const int n = static_cast<int>(tensors.size());
  if (n < 2) throw Error("pairwise_matrix needs at least 2 tensors");
  for (int i = 1; i < n; ++i) {
    if (tensors[i].rows != tensors[0].rows || tensors[i].cols != tensors[0].cols ||
        tensors[i].sample_rate != tensors[0].sample_rate) {
      throw Error("tensor " + std::to_string(i) + " does not match the shape of tensor 0");
    }
  }
  DistanceMatrix d(n, MatrixKind::Pairwise);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) d.set(i, j, csi::cir_distance(tensors[i], tensors[j]));
  }
  return d;
}

DistanceMatrix euclidean_matrix(const std::vector<Vec2>& points) {
  const int n = static_cast<int>(points.size());
  DistanceMatrix d(n, MatrixKind::Euclidean);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) d.set(i, j, distance(points[i], points[j]));
  }
  return d;
}

NeighborGraph knn_graph(const DistanceMatrix& d, int k) {
  const int n = d.size();
  if (k < 1 || k >= n) {
    throw Error("k = " + std::to_string(k) + " out of range [1, " + std::to_string(n - 1) + "]");
  }
  // Zero distances between distinct snapshots still form an edge.
  constexpr double kMinWeight = std::numeric_limits<double>::min();
  NeighborGraph g;
  g.n = n;
  g.k = k;
  std::vector<std::vector<int>> nbrs(n);
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) {
    order.clear();
    for (int j = 0; j < n; ++j) {
      if (j != i) order.push_back(j);
    }
    const double* row = d.row(i);
    std::partial_sort(order.begin(), order.begin() + k, order.end(), [row](int a, int b) {
      return row[a] < row[b] || (row[a] == row[b] && a < b);
    });
    for (int m = 0; m < k; ++m) {
      nbrs[i].push_back(order[m]);
      nbrs[order[m]].push_back(i);
    }
  }
  g.adjacency.resize(n);
  for (int i = 0; i < n; ++i) {
    auto& ids = nbrs[i];
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    g.adjacency[i].reserve(ids.size());
    for (int j : ids) g.adjacency[i].push_back({j, std::max(d(i, j), kMinWeight)});
  }
  return g;
}

std::vector<std::vector<int>> connected_components(const NeighborGraph& g) {
  std::vector<int> label(g.n, -1);
  std::vector<std::vector<int>> out;
  std::vector<int> stack;
  for (int s = 0; s < g.n; ++s) {
    if (label[s] >= 0) continue;
    const int c = static_cast<int>(out.size());
    out.emplace_back();
    label[s] = c;
    stack.push_back(s);
    while (!stack.empty()) {
      const int u = stack.back();
      stack.pop_back();
      out[c].push_back(u);
      for (const auto& e : g.adjacency[u]) {
        if (label[e.to] < 0) {
          label[e.to] = c;
          stack.push_back(e.to);
        }
      }
    }
    std::sort(out[c].begin(), out[c].end());
  }
  return out;
}

DistanceMatrix geodesic_matrix(const NeighborGraph& g) {
  const auto comps = connected_components(g);
  if (comps.size() > 1) {
    std::ostringstream os;
    os << "neighbour graph is disconnected: " << comps.size() << " components of sizes";
    for (const auto& c : comps) os << ' ' << c.size();
    throw Error(os.str());
  }
  const int n = g.n;
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> dist(static_cast<std::size_t>(n) * n, kInf);
  using Item = std::pair<double, int>;
  for (int s = 0; s < n; ++s) {
    double* ds = dist.data() + static_cast<std::size_t>(s) * n;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
    ds[s] = 0.0;
    heap.push({0.0, s});
    while (!heap.empty()) {
      const auto [du, u] = heap.top();
      heap.pop();
      if (du > ds[u]) continue;
      for (const auto& e : g.adjacency[u]) {
        const double cand = du + e.weight;
        if (cand < ds[e.to]) {
          ds[e.to] = cand;
          heap.push({cand, e.to});
        }
      }
    }
  }
  DistanceMatrix out(n, MatrixKind::Geodesic);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      // Both runs find a shortest path; they may differ in the last bit.
      out.set(i, j, std::min(dist[static_cast<std::size_t>(i) * n + j], dist[static_cast<std::size_t>(j) * n + i]));
    }
  }
  return out;
}

int minimal_connecting_k(const DistanceMatrix& d) {
  const int n = d.size();
  if (n < 2) throw Error("minimal_connecting_k needs at least 2 nodes");
  int lo = 1;
  int hi = n - 1;
  while (lo < hi) {
    const int mid = lo + (hi - lo) / 2;
    if (connected_components(knn_graph(d, mid)).size() == 1) {
      hi = mid;
    } else {
      lo = mid + 1;
    }
  }
  return lo;
}

}  // namespace geochart::graph

#include "geochart/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Dense>

namespace geochart::eval {

namespace {

void check_k(int n, int k) {
  if (k < 1 || 3 * k > 2 * n - 2 || k > n - 1) {
    throw Error("K = " + std::to_string(k) + " out of range for N = " + std::to_string(n) +
                " (need 1 <= K <= (2N-2)/3)");
  }
}

// Sum over i of the rank excess, in `rank_space`, of the K nearest neighbours
// taken in `neighbor_space`.
double rank_penalty(const graph::DistanceMatrix& neighbor_space, const graph::DistanceMatrix& rank_space, int k) {
  const int n = neighbor_space.size();
  double penalty = 0.0;
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) {
    const std::vector<int> ranks = neighbor_ranks(rank_space, i);
    order.clear();
    for (int j = 0; j < n; ++j) {
      if (j != i) order.push_back(j);
    }
    const double* row = neighbor_space.row(i);
    std::partial_sort(order.begin(), order.begin() + k, order.end(),
                      [row](int a, int b) { return row[a] < row[b] || (row[a] == row[b] && a < b); });
    for (int m = 0; m < k; ++m) {
      const int r = ranks[order[m]];
      if (r > k) penalty += r - k;
    }
  }
  return penalty;
}

double rank_score(const graph::DistanceMatrix& neighbor_space, const graph::DistanceMatrix& rank_space, int k) {
  const int n = neighbor_space.size();
  if (rank_space.size() != n) throw Error("distance matrices differ in size");
  check_k(n, k);
  const double norm = static_cast<double>(n) * k * (2.0 * n - 3.0 * k - 1.0);
  return 1.0 - 2.0 / norm * rank_penalty(neighbor_space, rank_space, k);
}

}  // namespace

std::vector<Vec2> AffineTransform::apply(const std::vector<Vec2>& pts) const {
  std::vector<Vec2> out;
  out.reserve(pts.size());
  for (const auto& p : pts) out.push_back(apply(p));
  return out;
}

bool AffineTransform::finite() const {
  for (const auto& row : m) {
    for (double v : row) {
      if (!std::isfinite(v)) return false;
    }
  }
  return true;
}

int default_k(int n) { return std::max(1, static_cast<int>(std::floor(0.05 * n))); }

std::vector<int> neighbor_ranks(const graph::DistanceMatrix& d, int i) {
  const int n = d.size();
  std::vector<int> order;
  order.reserve(n - 1);
  for (int j = 0; j < n; ++j) {
    if (j != i) order.push_back(j);
  }
  const double* row = d.row(i);
  std::sort(order.begin(), order.end(), [row](int a, int b) { return row[a] < row[b] || (row[a] == row[b] && a < b); });
  std::vector<int> ranks(n, 0);
  for (int r = 0; r < n - 1; ++r) ranks[order[r]] = r + 1;
  return ranks;
}

double continuity(const graph::DistanceMatrix& original, const graph::DistanceMatrix& embedded, int k) {
  return rank_score(original, embedded, k);
}

double trustworthiness(const graph::DistanceMatrix& original, const graph::DistanceMatrix& embedded, int k) {
  return rank_score(embedded, original, k);
}

AffineTransform fit_affine(const std::vector<Vec2>& chart, const std::vector<Vec2>& ground_truth) {
  const auto n = static_cast<Eigen::Index>(chart.size());
  if (static_cast<std::size_t>(n) != ground_truth.size()) throw Error("chart and ground truth differ in length");
  if (n < 3) throw Error("affine fit needs at least 3 points");
  Eigen::MatrixXd z(n, 3);
  Eigen::MatrixXd x(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    z(i, 0) = chart[i].x;
    z(i, 1) = chart[i].y;
    z(i, 2) = 1.0;
    x(i, 0) = ground_truth[i].x;
    x(i, 1) = ground_truth[i].y;
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(z);
  qr.setThreshold(1e-10);
  if (qr.rank() < 3) throw Error("chart points are collinear or degenerate; affine fit is rank deficient");
  const Eigen::MatrixXd sol = qr.solve(x);  // [3 x 2]
  AffineTransform t;
  for (int r = 0; r < 2; ++r) {
    for (int c = 0; c < 3; ++c) t.m[r][c] = sol(c, r);
  }
  if (!t.finite()) throw Error("affine fit produced non-finite coefficients");
  return t;
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error("pearson: inputs differ in length");
  const auto n = static_cast<double>(x.size());
  if (x.size() < 2) return 0.0;
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx <= 0.0 || syy <= 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

PositionErrors position_errors(const std::vector<Vec2>& chart, const AffineTransform& transform,
                               const std::vector<Vec2>& ground_truth) {
  if (chart.size() != ground_truth.size()) throw Error("chart and ground truth differ in length");
  PositionErrors out;
  out.errors.reserve(chart.size());
  for (std::size_t i = 0; i < chart.size(); ++i) out.errors.push_back(distance(transform.apply(chart[i]), ground_truth[i]));
  if (out.errors.empty()) return out;
  out.mae = std::accumulate(out.errors.begin(), out.errors.end(), 0.0) / static_cast<double>(out.errors.size());
  out.ce90 = percentile(out.errors, 0.9);
  return out;
}

EvalReport evaluate(const chart::Embedding& chart, const graph::DistanceMatrix& original,
                    const std::vector<Vec2>& ground_truth, const AffineTransform& transform, int k) {
  const int n = static_cast<int>(chart.points.size());
  if (original.size() != n) throw Error("original-space matrix does not match the chart size");
  EvalReport r;
  r.method = chart.method;
  r.n = n;
  r.k_neighbors = k > 0 ? k : default_k(n);
  const graph::DistanceMatrix embedded = graph::euclidean_matrix(chart.points);
  r.ct = continuity(original, embedded, r.k_neighbors);
  r.tw = trustworthiness(original, embedded, r.k_neighbors);
  if (!ground_truth.empty()) {
    const graph::DistanceMatrix truth = graph::euclidean_matrix(ground_truth);
    r.ct_ground_truth = continuity(truth, embedded, r.k_neighbors);
    r.tw_ground_truth = trustworthiness(truth, embedded, r.k_neighbors);
    const PositionErrors pe = position_errors(chart.points, transform, ground_truth);
    r.mae = pe.mae;
    r.ce90 = pe.ce90;
  }
  r.transform = transform;
  return r;
}

}  // namespace geochart::eval

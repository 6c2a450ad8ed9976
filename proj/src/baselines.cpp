#include "geochart/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace geochart::chart {

namespace {

constexpr int kDenseEigenLimit = 300;

double zero_floor(const graph::DistanceMatrix& d) {
  const double max_d = *std::max_element(d.values().begin(), d.values().end());
  return max_d > 0.0 ? 1e-12 * max_d : 1e-12;
}

void fix_signs(Eigen::MatrixXd& vectors) {
  for (Eigen::Index c = 0; c < vectors.cols(); ++c) {
    const double scale = vectors.col(c).cwiseAbs().maxCoeff();
    for (Eigen::Index r = 0; r < vectors.rows(); ++r) {
      if (std::abs(vectors(r, c)) > 1e-12 * scale) {
        if (vectors(r, c) < 0.0) vectors.col(c) *= -1.0;
        break;
      }
    }
  }
}

std::vector<Vec2> to_points(const Eigen::MatrixXd& xy) {
  std::vector<Vec2> out(static_cast<std::size_t>(xy.rows()));
  for (Eigen::Index i = 0; i < xy.rows(); ++i) out[i] = {xy(i, 0), xy(i, 1)};
  return out;
}

Eigen::MatrixXd initial_configuration(const graph::DistanceMatrix& d, bool classical, std::uint64_t seed) {
  const int n = d.size();
  Eigen::MatrixXd x(n, 2);
  const double max_d = *std::max_element(d.values().begin(), d.values().end());
  Rng rng = make_stream(seed, 0x696e6974);
  if (classical) {
    const auto pts = classical_scaling(d, seed);
    std::normal_distribution<double> jitter(0.0, 1e-6 * max_d);
    for (int i = 0; i < n; ++i) {
      x(i, 0) = pts[i].x + (max_d > 0.0 ? jitter(rng) : 0.0);
      x(i, 1) = pts[i].y + (max_d > 0.0 ? jitter(rng) : 0.0);
    }
  } else {
    std::uniform_real_distribution<double> u(0.0, max_d > 0.0 ? max_d : 1.0);
    for (int i = 0; i < n; ++i) {
      x(i, 0) = u(rng);
      x(i, 1) = u(rng);
    }
  }
  return x;
}

}  // namespace

EigenPairs top_eigenpairs(const Eigen::MatrixXd& a, int count, std::uint64_t seed) {
  const auto n = a.rows();
  if (a.cols() != n) throw Error("eigen solve needs a square matrix");
  if (count < 1 || count > n) throw Error("requested eigenpair count out of range");
  EigenPairs out;
  if (n <= kDenseEigenLimit) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
    if (es.info() != Eigen::Success) throw Error("eigen solve failed");
    out.values = es.eigenvalues().tail(count).reverse();
    out.vectors = es.eigenvectors().rightCols(count).rowwise().reverse();
    return out;
  }
  // Shifted block power iteration with a final Rayleigh-Ritz step.
  const double shift = a.cwiseAbs().rowwise().sum().maxCoeff();
  const int block = static_cast<int>(std::min<Eigen::Index>(n, count + 6));
  Rng rng = make_stream(seed, 0x65696773);
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXd q(n, block);
  for (Eigen::Index c = 0; c < block; ++c) {
    for (Eigen::Index r = 0; r < n; ++r) q(r, c) = g(rng);
  }
  q = Eigen::HouseholderQR<Eigen::MatrixXd>(q).householderQ() * Eigen::MatrixXd::Identity(n, block);
  Eigen::VectorXd previous = Eigen::VectorXd::Zero(count);
  for (int it = 0; it < 2000; ++it) {
    Eigen::MatrixXd z = a * q + shift * q;
    q = Eigen::HouseholderQR<Eigen::MatrixXd>(z).householderQ() * Eigen::MatrixXd::Identity(n, block);
    if (it % 10 == 9) {
      const Eigen::MatrixXd t = q.transpose() * a * q;
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t);
      const Eigen::VectorXd current = es.eigenvalues().tail(count).reverse();
      const double scale = std::max(current.cwiseAbs().maxCoeff(), 1e-300);
      if ((current - previous).cwiseAbs().maxCoeff() <= 1e-13 * scale) break;
      previous = current;
    }
  }
  const Eigen::MatrixXd t = q.transpose() * a * q;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t);
  out.values = es.eigenvalues().tail(count).reverse();
  out.vectors = q * es.eigenvectors().rightCols(count).rowwise().reverse();
  return out;
}

PcaModel fit_pca(const Eigen::MatrixXd& inputs) {
  const auto n = inputs.cols();
  if (n < 3) throw Error("PCA needs at least 3 samples");
  PcaModel model;
  model.mean = inputs.rowwise().mean();
  const Eigen::MatrixXd centered = inputs.colwise() - model.mean;
  EigenPairs ep;
  if (inputs.rows() <= n) {
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(inputs.rows(), inputs.rows());
    cov.selfadjointView<Eigen::Lower>().rankUpdate(centered, 1.0 / static_cast<double>(n - 1));
    cov = cov.selfadjointView<Eigen::Lower>();
    ep = top_eigenpairs(cov, 2);
    model.directions = ep.vectors;
  } else {
    const Eigen::MatrixXd gram = centered.transpose() * centered / static_cast<double>(n - 1);
    ep = top_eigenpairs(gram, 2);
    model.directions = centered * ep.vectors;
    for (Eigen::Index c = 0; c < 2; ++c) {
      const double len = model.directions.col(c).norm();
      if (len > 0.0) model.directions.col(c) /= len;
    }
  }
  if (!(ep.values(0) > 0.0) || !(ep.values(1) > 1e-12 * ep.values(0))) {
    throw Error("PCA input has rank < 2");
  }
  fix_signs(model.directions);
  model.variances = ep.values.head<2>();
  return model;
}

std::vector<Vec2> pca_project(const PcaModel& model, const Eigen::MatrixXd& inputs) {
  if (inputs.rows() != model.mean.size()) throw Error("PCA input dimension mismatch");
  const Eigen::MatrixXd proj = (inputs.colwise() - model.mean).transpose() * model.directions;
  return to_points(proj);
}

Embedding pca_embed(const std::vector<csi::AlignedTensor>& tensors) {
  const Eigen::MatrixXd inputs = stack_inputs(tensors);
  Embedding out;
  out.method = "pca";
  out.points = pca_project(fit_pca(inputs), inputs);
  return out;
}

std::vector<Vec2> classical_scaling(const graph::DistanceMatrix& d, std::uint64_t seed) {
  const int n = d.size();
  if (n == 0) return {};
  Eigen::MatrixXd b(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) b(i, j) = -0.5 * d(i, j) * d(i, j);
  }
  // Double centering.
  const Eigen::VectorXd row_mean = b.rowwise().mean();
  const double total_mean = row_mean.mean();
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) b(i, j) += total_mean - row_mean(i) - row_mean(j);
  }
  std::vector<Vec2> out(n);
  if (n == 1) return out;
  const EigenPairs ep = top_eigenpairs(b, 2, seed);
  Eigen::MatrixXd vecs = ep.vectors;
  fix_signs(vecs);
  const double s0 = std::sqrt(std::max(ep.values(0), 0.0));
  const double s1 = std::sqrt(std::max(ep.values(1), 0.0));
  for (int i = 0; i < n; ++i) out[i] = {s0 * vecs(i, 0), s1 * vecs(i, 1)};
  return out;
}

double raw_stress(const graph::DistanceMatrix& d, const std::vector<Vec2>& points) {
  const int n = d.size();
  double s = 0.0;
  for (int i = 0; i < n; ++i) {
    const double* row = d.row(i);
    for (int j = i + 1; j < n; ++j) {
      const double r = row[j] - distance(points[i], points[j]);
      s += r * r;
    }
  }
  return s;
}

MdsResult mds_embed(const graph::DistanceMatrix& d, const MdsConfig& cfg) {
  const int n = d.size();
  MdsResult out;
  out.embedding.method = "isomap_mds";
  if (n == 0) return out;
  Eigen::MatrixXd x = initial_configuration(d, cfg.classical_init, cfg.seed);
  std::vector<Vec2> pts = to_points(x);
  double stress = raw_stress(d, pts);
  out.stress_history.push_back(stress);

  Eigen::MatrixXd next(n, 2);
  for (int it = 0; it < cfg.max_iterations && stress > 0.0; ++it) {
    // Guttman transform with unit weights.
    for (int i = 0; i < n; ++i) {
      const double* row = d.row(i);
      double sx = 0.0;
      double sy = 0.0;
      for (int j = 0; j < n; ++j) {
        if (j == i) continue;
        const double dx = x(i, 0) - x(j, 0);
        const double dy = x(i, 1) - x(j, 1);
        const double dist = std::sqrt(dx * dx + dy * dy);
        if (dist > 0.0) {
          const double ratio = row[j] / dist;
          sx += ratio * dx;
          sy += ratio * dy;
        }
      }
      next(i, 0) = sx / n;
      next(i, 1) = sy / n;
    }
    // The transform returns a centred configuration; keep the previous centroid.
    const Eigen::RowVector2d centroid = x.colwise().mean();
    next.rowwise() += centroid;
    x.swap(next);
    pts = to_points(x);
    const double new_stress = raw_stress(d, pts);
    out.stress_history.push_back(new_stress);
    const double change = stress - new_stress;
    stress = new_stress;
    if (change <= cfg.tolerance * std::max(stress, 1e-300)) break;
  }
  out.embedding.points = std::move(pts);
  return out;
}

double sammon_stress(const graph::DistanceMatrix& d, const std::vector<Vec2>& points) {
  const int n = d.size();
  const double floor = zero_floor(d);
  double scale = 0.0;
  double e = 0.0;
  for (int i = 0; i < n; ++i) {
    const double* row = d.row(i);
    for (int j = i + 1; j < n; ++j) {
      const double target = std::max(row[j], floor);
      const double r = target - distance(points[i], points[j]);
      e += r * r / target;
      scale += target;
    }
  }
  return scale > 0.0 ? e / scale : 0.0;
}

SammonResult sammon_embed(const graph::DistanceMatrix& d, const SammonConfig& cfg) {
  const int n = d.size();
  SammonResult out;
  out.embedding.method = "sammon";
  if (n == 0) return out;
  const double floor = zero_floor(d);
  Eigen::MatrixXd y = initial_configuration(d, true, cfg.seed);
  std::vector<Vec2> pts = to_points(y);
  double e = sammon_stress(d, pts);
  out.stress_history.push_back(e);
  const double min_dist = std::max(floor, 1e-300);

  Eigen::MatrixXd step(n, 2);
  Eigen::MatrixXd trial(n, 2);
  for (int it = 0; it < cfg.max_iterations && e > 0.0; ++it) {
    // Diagonal Newton direction of the Sammon stress.
    for (int i = 0; i < n; ++i) {
      const double* row = d.row(i);
      double g0 = 0.0, g1 = 0.0, h0 = 0.0, h1 = 0.0;
      for (int j = 0; j < n; ++j) {
        if (j == i) continue;
        const double dx = y(j, 0) - y(i, 0);
        const double dy = y(j, 1) - y(i, 1);
        const double dist = std::max(std::sqrt(dx * dx + dy * dy), min_dist);
        const double dinv = 1.0 / dist;
        const double delta = dinv - 1.0 / std::max(row[j], floor);
        const double dinv3 = dinv * dinv * dinv;
        g0 += delta * dx;
        g1 += delta * dy;
        h0 += dinv3 * dx * dx - delta;
        h1 += dinv3 * dy * dy - delta;
      }
      step(i, 0) = -g0 / std::max(std::abs(h0), 1e-300);
      step(i, 1) = -g1 / std::max(std::abs(h1), 1e-300);
    }
    bool improved = false;
    double e_new = e;
    for (int h = 0; h < cfg.max_halvings; ++h) {
      trial = y + step;
      const auto trial_pts = to_points(trial);
      e_new = sammon_stress(d, trial_pts);
      if (e_new < e) {
        improved = true;
        y.swap(trial);
        pts = trial_pts;
        break;
      }
      step *= 0.5;
    }
    if (!improved) break;
    out.stress_history.push_back(e_new);
    const double change = (e - e_new) / e;
    e = e_new;
    if (change < cfg.tolerance) break;
  }
  out.embedding.points = std::move(pts);
  return out;
}

std::vector<Vec2> extend_out_of_sample(const std::vector<Vec2>& reference_points, const std::vector<double>& cross,
                                       int k) {
  const std::size_t nr = reference_points.size();
  if (nr == 0) throw Error("no reference points for out-of-sample extension");
  if (cross.size() % nr != 0) throw Error("cross-distance buffer does not match the reference count");
  const std::size_t nq = cross.size() / nr;
  const int kk = std::clamp(k, 1, static_cast<int>(nr));
  std::vector<Vec2> out(nq);
  std::vector<int> order(nr);
  for (std::size_t q = 0; q < nq; ++q) {
    const double* row = cross.data() + q * nr;
    std::iota(order.begin(), order.end(), 0);
    std::partial_sort(order.begin(), order.begin() + kk, order.end(),
                      [row](int a, int b) { return row[a] < row[b] || (row[a] == row[b] && a < b); });
    if (row[order[0]] == 0.0) {
      out[q] = reference_points[order[0]];
      continue;
    }
    double wsum = 0.0;
    Vec2 acc{};
    for (int m = 0; m < kk; ++m) {
      const double w = 1.0 / row[order[m]];
      acc = acc + w * reference_points[order[m]];
      wsum += w;
    }
    out[q] = (1.0 / wsum) * acc;
  }
  return out;
}

}  // namespace geochart::chart

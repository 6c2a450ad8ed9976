#include "geochart/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace geochart::chart {

namespace {

struct ForwardCache {
  std::vector<Eigen::MatrixXd> activations;  // a_0 (scaled input) ... a_{L-1}
  std::vector<Eigen::MatrixXd> preacts;      // z_1 ... z_L
  Eigen::MatrixXd output;                    // scaled output
};

ForwardCache forward_cached(const EncoderParams& p, const Eigen::MatrixXd& inputs) {
  if (inputs.rows() != p.input_size()) {
    throw Error("encoder expects inputs of size " + std::to_string(p.input_size()) + ", got " +
                std::to_string(inputs.rows()));
  }
  ForwardCache c;
  c.activations.push_back(inputs / p.input_scale);
  const std::size_t nl = p.layers.size();
  for (std::size_t l = 0; l < nl; ++l) {
    Eigen::MatrixXd z = p.layers[l].weight * c.activations.back();
    z.colwise() += p.layers[l].bias;
    if (l + 1 < nl) {
      c.activations.push_back(z.cwiseMax(0.0));
    }
    c.preacts.push_back(std::move(z));
  }
  c.output = c.preacts.back() * p.output_scale;
  return c;
}

Gradients backward(const EncoderParams& p, const ForwardCache& c, const Eigen::MatrixXd& d_output) {
  const std::size_t nl = p.layers.size();
  Gradients g(nl);
  Eigen::MatrixXd dz = d_output * p.output_scale;
  for (std::size_t l = nl; l-- > 0;) {
    g[l].weight.noalias() = dz * c.activations[l].transpose();
    g[l].bias = dz.rowwise().sum();
    if (l > 0) {
      Eigen::MatrixXd da = p.layers[l].weight.transpose() * dz;
      dz = (c.preacts[l - 1].array() > 0.0).select(da, 0.0);
    }
  }
  return g;
}

Eigen::Map<const Eigen::VectorXd> as_vector(std::span<const double> x) {
  return {x.data(), static_cast<Eigen::Index>(x.size())};
}

}  // namespace

std::size_t EncoderParams::num_parameters() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  return n;
}

bool EncoderParams::all_finite() const {
  for (const auto& l : layers) {
    if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
  }
  return std::isfinite(input_scale) && std::isfinite(output_scale);
}

std::vector<double> flatten_layers(const std::vector<DenseLayer>& layers) {
  std::vector<double> out;
  for (const auto& l : layers) {
    out.insert(out.end(), l.weight.data(), l.weight.data() + l.weight.size());
    out.insert(out.end(), l.bias.data(), l.bias.data() + l.bias.size());
  }
  return out;
}

std::vector<double> EncoderParams::flatten() const { return flatten_layers(layers); }

void EncoderParams::assign(std::span<const double> flat) {
  if (flat.size() != num_parameters()) throw Error("parameter vector has the wrong length");
  std::size_t pos = 0;
  for (auto& l : layers) {
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(pos), l.weight.size(), l.weight.data());
    pos += static_cast<std::size_t>(l.weight.size());
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(pos), l.bias.size(), l.bias.data());
    pos += static_cast<std::size_t>(l.bias.size());
  }
}

EncoderParams init_encoder(const EncoderShape& shape, std::uint64_t seed) {
  if (shape.input <= 0 || shape.output <= 0) throw Error("encoder layers must have positive size");
  if (shape.output != 2) throw Error("encoder output dimension must be 2");
  for (int h : shape.hidden) {
    if (h <= 0) throw Error("encoder layers must have positive size");
  }
  std::vector<int> sizes{shape.input};
  sizes.insert(sizes.end(), shape.hidden.begin(), shape.hidden.end());
  sizes.push_back(shape.output);

  Rng rng = make_stream(seed, 0x656e63);
  EncoderParams p;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const int fan_in = sizes[l];
    const int fan_out = sizes[l + 1];
    const double limit = std::sqrt(6.0 / fan_in);
    std::uniform_real_distribution<double> u(-limit, limit);
    DenseLayer layer;
    layer.weight.resize(fan_out, fan_in);
    for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) {
      for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) layer.weight(r, c) = u(rng);
    }
    layer.bias = Eigen::VectorXd::Zero(fan_out);
    p.layers.push_back(std::move(layer));
  }
  return p;
}

Eigen::MatrixXd forward_batch(const EncoderParams& p, const Eigen::MatrixXd& inputs) {
  return forward_cached(p, inputs).output;
}

Vec2 forward(const EncoderParams& p, std::span<const double> x) {
  const Eigen::MatrixXd out = forward_batch(p, as_vector(x));
  return {out(0, 0), out(1, 0)};
}

Vec2 forward(const EncoderParams& p, const csi::AlignedTensor& x) { return forward(p, x.flat()); }

StepResult siamese_step(const EncoderParams& p, std::span<const double> x_i, std::span<const double> x_j,
                        double d_target) {
  if (!(d_target >= 0.0)) throw Error("target distance must be non-negative");
  if (x_i.size() != x_j.size()) throw Error("pair inputs differ in size");
  Eigen::MatrixXd inputs(static_cast<Eigen::Index>(x_i.size()), 2);
  inputs.col(0) = as_vector(x_i);
  inputs.col(1) = as_vector(x_j);
  const ForwardCache cache = forward_cached(p, inputs);

  const Eigen::Vector2d delta = cache.output.col(0) - cache.output.col(1);
  const double dist = delta.norm();
  const double residual = d_target - dist;
  StepResult out;
  out.loss = std::abs(residual);
  Eigen::MatrixXd d_output = Eigen::MatrixXd::Zero(2, 2);
  if (dist > 0.0 && residual != 0.0) {
    const double sign = residual > 0.0 ? 1.0 : -1.0;
    const Eigen::Vector2d dz_i = -sign * delta / dist;
    d_output.col(0) = dz_i;
    d_output.col(1) = -dz_i;
  }
  out.grad = backward(p, cache, d_output);
  return out;
}

void TrainConfig::validate() const {
  if (epochs < 0) throw Error("epochs must be >= 0");
  if (pairs_per_epoch <= 0 || batch_size <= 0) throw Error("pairs_per_epoch and batch_size must be positive");
  if (!(learning_rate > 0.0)) throw Error("learning rate must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) throw Error("Adam betas must lie in [0, 1)");
  if (patience < 0) throw Error("patience must be >= 0");
  for (int h : hidden) {
    if (h <= 0) throw Error("hidden layer sizes must be positive");
  }
}

Eigen::MatrixXd stack_inputs(const std::vector<csi::AlignedTensor>& tensors) {
  if (tensors.empty()) throw Error("no tensors to stack");
  const auto dim = static_cast<Eigen::Index>(tensors.front().values.size());
  Eigen::MatrixXd out(dim, static_cast<Eigen::Index>(tensors.size()));
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    if (static_cast<Eigen::Index>(tensors[i].values.size()) != dim) {
      throw Error("tensor " + std::to_string(i) + " has a different size");
    }
    out.col(static_cast<Eigen::Index>(i)) = as_vector(tensors[i].flat());
  }
  return out;
}

TrainResult train(const std::vector<csi::AlignedTensor>& tensors, const graph::DistanceMatrix& geodesic,
                  const TrainConfig& cfg) {
  cfg.validate();
  const Eigen::MatrixXd inputs = stack_inputs(tensors);
  EncoderShape shape;
  shape.input = static_cast<int>(inputs.rows());
  shape.hidden = cfg.hidden;
  return train(inputs, geodesic, cfg, init_encoder(shape, cfg.seed));
}

TrainResult train(const Eigen::MatrixXd& inputs, const graph::DistanceMatrix& geodesic, const TrainConfig& cfg,
                  EncoderParams initial) {
  cfg.validate();
  const int n = static_cast<int>(inputs.cols());
  if (geodesic.size() != n) {
    throw Error("geodesic matrix is " + std::to_string(geodesic.size()) + "x" + std::to_string(geodesic.size()) +
                " but there are " + std::to_string(n) + " inputs");
  }
  if (n < 2) throw Error("training needs at least 2 inputs");

  TrainResult result;
  result.params = std::move(initial);
  EncoderParams& p = result.params;
  if (cfg.normalize_inputs) {
    const double max_in = inputs.cwiseAbs().maxCoeff();
    p.input_scale = max_in > 0.0 ? max_in : 1.0;
  }
  const double max_target = *std::max_element(geodesic.values().begin(), geodesic.values().end());
  p.output_scale = max_target > 0.0 ? max_target : 1.0;
  if (cfg.epochs == 0) return result;

  // Adam moments, one per layer tensor.
  Gradients m(p.layers.size());
  Gradients v(p.layers.size());
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    m[l].weight = Eigen::MatrixXd::Zero(p.layers[l].weight.rows(), p.layers[l].weight.cols());
    m[l].bias = Eigen::VectorXd::Zero(p.layers[l].bias.size());
    v[l] = m[l];
  }

  Rng rng = make_stream(cfg.seed, 0x747261696e);
  std::uniform_int_distribution<int> pick(0, n - 1);
  const int steps = (cfg.pairs_per_epoch + cfg.batch_size - 1) / cfg.batch_size;
  std::vector<int> slot(n, -1);
  std::vector<int> unique_ids;
  std::vector<std::pair<int, int>> pairs;
  long long t = 0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double epoch_loss = 0.0;
    long long epoch_pairs = 0;
    for (int step = 0; step < steps; ++step) {
      const int batch = std::min(cfg.batch_size, cfg.pairs_per_epoch - step * cfg.batch_size);
      pairs.clear();
      unique_ids.clear();
      for (int b = 0; b < batch; ++b) {
        int i = pick(rng);
        int j = pick(rng);
        while (j == i) j = pick(rng);
        pairs.emplace_back(i, j);
        for (int id : {i, j}) {
          if (slot[id] < 0) {
            slot[id] = static_cast<int>(unique_ids.size());
            unique_ids.push_back(id);
          }
        }
      }
      Eigen::MatrixXd x(inputs.rows(), static_cast<Eigen::Index>(unique_ids.size()));
      for (std::size_t u = 0; u < unique_ids.size(); ++u) x.col(static_cast<Eigen::Index>(u)) = inputs.col(unique_ids[u]);
      const ForwardCache cache = forward_cached(p, x);

      Eigen::MatrixXd d_output = Eigen::MatrixXd::Zero(2, x.cols());
      double batch_loss = 0.0;
      for (const auto& [i, j] : pairs) {
        const int si = slot[i];
        const int sj = slot[j];
        const Eigen::Vector2d delta = cache.output.col(si) - cache.output.col(sj);
        const double dist = delta.norm();
        const double residual = geodesic(i, j) - dist;
        batch_loss += std::abs(residual);
        if (dist > 0.0 && residual != 0.0) {
          const Eigen::Vector2d dz = -(residual > 0.0 ? 1.0 : -1.0) * delta / (dist * batch);
          d_output.col(si) += dz;
          d_output.col(sj) -= dz;
        }
      }
      for (int id : unique_ids) slot[id] = -1;
      if (!std::isfinite(batch_loss)) {
        std::ostringstream os;
        os << "non-finite loss at epoch " << epoch << ", step " << step;
        throw Error(os.str());
      }
      epoch_loss += batch_loss;
      epoch_pairs += batch;

      const Gradients g = backward(p, cache, d_output);
      ++t;
      const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
      const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
      const double lr = cfg.learning_rate * std::sqrt(bc2) / bc1;
      for (std::size_t l = 0; l < p.layers.size(); ++l) {
        m[l].weight = cfg.beta1 * m[l].weight + (1.0 - cfg.beta1) * g[l].weight;
        v[l].weight = cfg.beta2 * v[l].weight + (1.0 - cfg.beta2) * g[l].weight.cwiseAbs2();
        p.layers[l].weight.array() -= lr * m[l].weight.array() / (v[l].weight.array().sqrt() + cfg.epsilon);
        m[l].bias = cfg.beta1 * m[l].bias + (1.0 - cfg.beta1) * g[l].bias;
        v[l].bias = cfg.beta2 * v[l].bias + (1.0 - cfg.beta2) * g[l].bias.cwiseAbs2();
        p.layers[l].bias.array() -= lr * m[l].bias.array() / (v[l].bias.array().sqrt() + cfg.epsilon);
      }
      if (!p.all_finite()) {
        std::ostringstream os;
        os << "non-finite parameters at epoch " << epoch << ", step " << step;
        throw Error(os.str());
      }
    }
    result.loss_history.push_back(epoch_loss / static_cast<double>(epoch_pairs));
    result.epochs_run = epoch + 1;
    // Stop once the best of the last `patience` epochs is not a real
    // improvement on the best seen before them.
    const auto& h = result.loss_history;
    if (cfg.patience > 0 && static_cast<int>(h.size()) > cfg.patience) {
      const auto split = h.end() - cfg.patience;
      const double before = *std::min_element(h.begin(), split);
      const double recent = *std::min_element(split, h.end());
      if (recent > (1.0 - cfg.min_improvement) * before) break;
    }
  }
  return result;
}

Embedding embed_dataset(const EncoderParams& p, const std::vector<csi::AlignedTensor>& tensors) {
  Embedding out;
  out.method = "siamese_geo";
  if (tensors.empty()) return out;
  const Eigen::MatrixXd z = forward_batch(p, stack_inputs(tensors));
  out.points.reserve(tensors.size());
  for (Eigen::Index i = 0; i < z.cols(); ++i) out.points.push_back({z(0, i), z(1, i)});
  return out;
}

}  // namespace geochart::chart

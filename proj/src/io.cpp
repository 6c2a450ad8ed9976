#include "geochart/io.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace geochart::io {

namespace {

template <typename T>
void write_le(const fs::path& path, std::span<const T> values) {
  static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(values.data()), static_cast<std::streamsize>(values.size_bytes()));
  } else {
    for (T v : values) {
      char bytes[sizeof(T)];
      std::memcpy(bytes, &v, sizeof(T));
      for (std::size_t b = 0; b < sizeof(T) / 2; ++b) std::swap(bytes[b], bytes[sizeof(T) - 1 - b]);
      out.write(bytes, sizeof(T));
    }
  }
  if (!out) throw Error("write failed for " + path.string());
}

template <typename T>
std::vector<T> read_le(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  in.seekg(0, std::ios::end);
  const auto size = static_cast<std::size_t>(in.tellg());
  in.seekg(0);
  if (size % sizeof(T) != 0) throw Error(path.string() + " size is not a multiple of " + std::to_string(sizeof(T)));
  std::vector<T> out(size / sizeof(T));
  in.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(size));
  if (!in) throw Error("read failed for " + path.string());
  if constexpr (std::endian::native == std::endian::big) {
    for (T& v : out) {
      char bytes[sizeof(T)];
      std::memcpy(bytes, &v, sizeof(T));
      for (std::size_t b = 0; b < sizeof(T) / 2; ++b) std::swap(bytes[b], bytes[sizeof(T) - 1 - b]);
      std::memcpy(&v, bytes, sizeof(T));
    }
  }
  return out;
}

std::vector<std::uint8_t> read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

json vec_json(Vec2 v) { return json::array({v.x, v.y}); }
Vec2 vec_from(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }

json segments_json(const std::vector<sim::Segment>& segs) {
  json arr = json::array();
  for (const auto& s : segs) arr.push_back({{"a", vec_json(s.a)}, {"b", vec_json(s.b)}, {"reflective", s.reflective}});
  return arr;
}

std::vector<sim::Segment> segments_from(const json& j, bool default_reflective) {
  std::vector<sim::Segment> out;
  for (const auto& s : j) out.push_back({vec_from(s.at("a")), vec_from(s.at("b")), s.value("reflective", default_reflective)});
  return out;
}

void require(const fs::path& p) {
  if (!fs::exists(p)) throw Error("missing file " + p.string());
}

}  // namespace

void write_f64(const fs::path& path, std::span<const double> values) { write_le(path, values); }
void write_f32(const fs::path& path, std::span<const float> values) { write_le(path, values); }
std::vector<double> read_f64(const fs::path& path) { return read_le<double>(path); }
std::vector<float> read_f32(const fs::path& path) { return read_le<float>(path); }

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error("invalid JSON in " + path.string() + ": " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw Error("write failed for " + path.string());
}

std::string fnv1a_hex(std::span<const std::uint8_t> bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::uint8_t b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

json to_json(const sim::EnvironmentSpec& env) {
  json stations = json::array();
  for (const auto& b : env.base_stations) stations.push_back({{"id", b.id}, {"position", vec_json(b.position)}});
  return {{"bounds", {{"min", vec_json(env.bounds.min)}, {"max", vec_json(env.bounds.max)}}},
          {"walls", segments_json(env.walls)},
          {"base_stations", stations},
          {"blockers", segments_json(env.blockers)}};
}

sim::EnvironmentSpec environment_from_json(const json& j) {
  if (j.is_string()) {
    if (j.get<std::string>() == "default") return sim::default_environment();
    throw Error("unknown named environment '" + j.get<std::string>() + "'");
  }
  sim::EnvironmentSpec env;
  try {
    if (j.contains("open")) {
      const auto& o = j.at("open");
      env = sim::open_environment(o.at("width").get<double>(), o.at("height").get<double>(),
                                  o.at("stations").get<int>());
    } else {
      env.bounds = {vec_from(j.at("bounds").at("min")), vec_from(j.at("bounds").at("max"))};
      env.walls = segments_from(j.value("walls", json::array()), true);
      for (const auto& b : j.at("base_stations")) env.base_stations.push_back({b.at("id").get<int>(), vec_from(b.at("position"))});
      env.blockers = segments_from(j.value("blockers", json::array()), false);
    }
  } catch (const json::exception& e) {
    throw Error(std::string("invalid environment spec: ") + e.what());
  }
  env.validate();
  return env;
}

json to_json(const sim::RadioConfig& r) {
  return {{"bandwidth", r.bandwidth},
          {"sample_rate", r.sample_rate},
          {"cir_length", r.cir_length},
          {"max_reflection_order", r.max_reflection_order},
          {"noise_std", r.noise_std},
          {"mode", sim::to_string(r.mode)},
          {"toa_noise_std", r.toa_noise_std},
          {"reflection_loss", r.reflection_loss},
          {"precursor", r.precursor},
          {"c", r.c}};
}

sim::RadioConfig radio_from_json(const json& j) {
  sim::RadioConfig r;
  try {
    r.bandwidth = j.value("bandwidth", r.bandwidth);
    r.sample_rate = j.value("sample_rate", r.sample_rate);
    r.cir_length = j.value("cir_length", r.cir_length);
    r.max_reflection_order = j.value("max_reflection_order", r.max_reflection_order);
    r.noise_std = j.value("noise_std", r.noise_std);
    r.mode = sim::mode_from_string(j.value("mode", sim::to_string(r.mode)));
    r.toa_noise_std = j.value("toa_noise_std", r.toa_noise_std);
    r.reflection_loss = j.value("reflection_loss", r.reflection_loss);
    r.precursor = j.value("precursor", r.precursor);
  } catch (const json::exception& e) {
    throw Error(std::string("invalid radio config: ") + e.what());
  }
  return r;
}

json to_json(const sim::TrajectorySpec& t) {
  return {{"kind", sim::to_string(t.kind)}, {"n", t.n},           {"speed", t.speed},
          {"dt", t.dt},                     {"spacing", t.spacing}, {"clearance", t.clearance},
          {"jitter", t.jitter}};
}

sim::TrajectorySpec trajectory_from_json(const json& j) {
  sim::TrajectorySpec t;
  try {
    t.kind = sim::trajectory_kind_from_string(j.value("kind", sim::to_string(t.kind)));
    t.n = j.value("n", t.n);
    t.speed = j.value("speed", t.speed);
    t.dt = j.value("dt", t.dt);
    t.spacing = j.value("spacing", t.spacing);
    t.clearance = j.value("clearance", t.clearance);
    t.jitter = j.value("jitter", t.jitter);
  } catch (const json::exception& e) {
    throw Error(std::string("invalid trajectory spec: ") + e.what());
  }
  return t;
}

json to_json(const chart::TrainConfig& c) {
  return {{"epochs", c.epochs},
          {"pairs_per_epoch", c.pairs_per_epoch},
          {"batch_size", c.batch_size},
          {"learning_rate", c.learning_rate},
          {"beta1", c.beta1},
          {"beta2", c.beta2},
          {"epsilon", c.epsilon},
          {"seed", c.seed},
          {"hidden", c.hidden},
          {"min_improvement", c.min_improvement},
          {"patience", c.patience},
          {"normalize_inputs", c.normalize_inputs}};
}

chart::TrainConfig train_config_from_json(const json& j) {
  chart::TrainConfig c;
  try {
    c.epochs = j.value("epochs", c.epochs);
    c.pairs_per_epoch = j.value("pairs_per_epoch", c.pairs_per_epoch);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.beta1 = j.value("beta1", c.beta1);
    c.beta2 = j.value("beta2", c.beta2);
    c.epsilon = j.value("epsilon", c.epsilon);
    c.seed = j.value("seed", c.seed);
    c.hidden = j.value("hidden", c.hidden);
    c.min_improvement = j.value("min_improvement", c.min_improvement);
    c.patience = j.value("patience", c.patience);
    c.normalize_inputs = j.value("normalize_inputs", c.normalize_inputs);
  } catch (const json::exception& e) {
    throw Error(std::string("invalid train config: ") + e.what());
  }
  c.validate();
  return c;
}

json to_json(const chart::MdsConfig& c) {
  return {{"max_iterations", c.max_iterations}, {"tolerance", c.tolerance}, {"seed", c.seed},
          {"classical_init", c.classical_init}};
}

chart::MdsConfig mds_config_from_json(const json& j) {
  chart::MdsConfig c;
  c.max_iterations = j.value("max_iterations", c.max_iterations);
  c.tolerance = j.value("tolerance", c.tolerance);
  c.seed = j.value("seed", c.seed);
  c.classical_init = j.value("classical_init", c.classical_init);
  return c;
}

json to_json(const chart::SammonConfig& c) {
  return {{"max_iterations", c.max_iterations}, {"max_halvings", c.max_halvings}, {"tolerance", c.tolerance},
          {"seed", c.seed}};
}

chart::SammonConfig sammon_config_from_json(const json& j) {
  chart::SammonConfig c;
  c.max_iterations = j.value("max_iterations", c.max_iterations);
  c.max_halvings = j.value("max_halvings", c.max_halvings);
  c.tolerance = j.value("tolerance", c.tolerance);
  c.seed = j.value("seed", c.seed);
  return c;
}

json to_json(const eval::EvalReport& r) {
  json t = json::array();
  for (const auto& row : r.transform.m) t.push_back(json::array({row[0], row[1], row[2]}));
  json j = {{"method", r.method}, {"split", r.split}, {"ct", r.ct},     {"tw", r.tw},       {"k_neighbors", r.k_neighbors},
            {"mae", r.mae},       {"ce90", r.ce90},   {"n", r.n},       {"transform", t}};
  if (r.ct_ground_truth) j["ct_ground_truth"] = *r.ct_ground_truth;
  if (r.tw_ground_truth) j["tw_ground_truth"] = *r.tw_ground_truth;
  return j;
}

std::string dataset_hash(const fs::path& dir) {
  std::vector<std::uint8_t> bytes = read_bytes(dir / "cirs.f32");
  const std::vector<std::uint8_t> toa = read_bytes(dir / "toa.f64");
  bytes.insert(bytes.end(), toa.begin(), toa.end());
  return fnv1a_hex(bytes);
}

void write_dataset(const fs::path& dir, const sim::Dataset& ds) {
  ds.validate();
  fs::create_directories(dir);
  const std::size_t n = ds.snapshots.size();
  const int nb = ds.num_stations();
  const int t = ds.radio.cir_length;
  std::vector<float> cirs;
  std::vector<double> toa, pos, ts;
  cirs.reserve(n * nb * t);
  for (const auto& s : ds.snapshots) {
    for (double v : s.cirs) cirs.push_back(static_cast<float>(v));
    toa.insert(toa.end(), s.measured_toa.begin(), s.measured_toa.end());
    pos.push_back(s.position.x);
    pos.push_back(s.position.y);
    ts.push_back(s.timestamp);
  }
  write_f32(dir / "cirs.f32", cirs);
  write_f64(dir / "toa.f64", toa);
  write_f64(dir / "pos.f64", pos);
  write_f64(dir / "ts.f64", ts);
  json meta = {{"environment", to_json(ds.environment)},
               {"radio", to_json(ds.radio)},
               {"seed", ds.rng_seed},
               {"N", n},
               {"N_b", nb},
               {"T", t},
               {"mode", sim::to_string(ds.radio.mode)}};
  write_json(dir / "meta.json", meta);
}

sim::Dataset read_dataset(const fs::path& dir) {
  for (const char* f : {"meta.json", "cirs.f32", "toa.f64", "pos.f64", "ts.f64"}) require(dir / f);
  const json meta = read_json(dir / "meta.json");
  sim::Dataset ds;
  ds.environment = environment_from_json(meta.at("environment"));
  ds.radio = radio_from_json(meta.at("radio"));
  ds.rng_seed = meta.at("seed").get<std::uint64_t>();
  const auto n = meta.at("N").get<std::size_t>();
  const int nb = meta.at("N_b").get<int>();
  const int t = meta.at("T").get<int>();
  const auto cirs = read_f32(dir / "cirs.f32");
  const auto toa = read_f64(dir / "toa.f64");
  const auto pos = read_f64(dir / "pos.f64");
  const auto ts = read_f64(dir / "ts.f64");
  if (cirs.size() != n * nb * t || toa.size() != n * nb || pos.size() != 2 * n || ts.size() != n) {
    throw Error("dataset " + dir.string() + ": binary sizes do not match meta.json");
  }
  ds.snapshots.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& s = ds.snapshots[i];
    s.index = static_cast<std::int64_t>(i);
    s.num_stations = nb;
    s.cir_length = t;
    s.cirs.assign(cirs.begin() + static_cast<std::ptrdiff_t>(i * nb * t),
                  cirs.begin() + static_cast<std::ptrdiff_t>((i + 1) * nb * t));
    s.measured_toa.assign(toa.begin() + static_cast<std::ptrdiff_t>(i * nb),
                          toa.begin() + static_cast<std::ptrdiff_t>((i + 1) * nb));
    s.position = {pos[2 * i], pos[2 * i + 1]};
    s.timestamp = ts[i];
  }
  ds.validate();
  return ds;
}

void write_matrix(const fs::path& blob, const graph::DistanceMatrix& d, int k, const std::string& source_hash) {
  if (blob.has_parent_path()) fs::create_directories(blob.parent_path());
  write_f64(blob, d.values());
  fs::path sidecar = blob;
  sidecar.replace_extension(".json");
  write_json(sidecar, {{"N", d.size()}, {"kind", graph::to_string(d.kind())}, {"k", k}, {"source", source_hash}});
}

graph::DistanceMatrix read_matrix(const fs::path& blob) {
  fs::path sidecar = blob;
  sidecar.replace_extension(".json");
  require(blob);
  require(sidecar);
  const json meta = read_json(sidecar);
  const int n = meta.at("N").get<int>();
  graph::DistanceMatrix d(n, graph::matrix_kind_from_string(meta.at("kind").get<std::string>()), read_f64(blob));
  d.validate();
  return d;
}

void write_encoder(const fs::path& dir, const chart::EncoderParams& p, int window_length, csi::RowNorm norm) {
  fs::create_directories(dir);
  json shapes = json::array();
  for (const auto& l : p.layers) shapes.push_back({l.weight.rows(), l.weight.cols()});
  write_json(dir / "encoder.json", {{"layers", shapes},
                                    {"activation", "relu"},
                                    {"output_activation", "identity"},
                                    {"input_scale", p.input_scale},
                                    {"output_scale", p.output_scale},
                                    {"window_length", window_length},
                                    {"cir_normalization", csi::to_string(norm)},
                                    {"layout", "per layer: weight column-major [out x in], then bias"}});
  write_f64(dir / "weights.f64", p.flatten());
}

chart::EncoderParams read_encoder(const fs::path& dir, int* window_length, csi::RowNorm* norm) {
  require(dir / "encoder.json");
  require(dir / "weights.f64");
  const json meta = read_json(dir / "encoder.json");
  chart::EncoderParams p;
  for (const auto& s : meta.at("layers")) {
    chart::DenseLayer l;
    l.weight = Eigen::MatrixXd::Zero(s.at(0).get<int>(), s.at(1).get<int>());
    l.bias = Eigen::VectorXd::Zero(s.at(0).get<int>());
    p.layers.push_back(std::move(l));
  }
  p.input_scale = meta.at("input_scale").get<double>();
  p.output_scale = meta.at("output_scale").get<double>();
  p.assign(read_f64(dir / "weights.f64"));
  if (window_length) *window_length = meta.value("window_length", 0);
  if (norm) *norm = csi::row_norm_from_string(meta.value("cir_normalization", std::string("none")));
  return p;
}

void write_embedding(const fs::path& dir, const chart::Embedding& e) {
  fs::create_directories(dir);
  std::vector<double> flat;
  flat.reserve(2 * e.points.size());
  for (const auto& p : e.points) {
    flat.push_back(p.x);
    flat.push_back(p.y);
  }
  write_f64(dir / "chart.f64", flat);
  write_json(dir / "chart.json", {{"method", e.method}, {"N", e.points.size()}});
}

chart::Embedding read_embedding(const fs::path& dir) {
  require(dir / "chart.f64");
  require(dir / "chart.json");
  const json meta = read_json(dir / "chart.json");
  const auto flat = read_f64(dir / "chart.f64");
  chart::Embedding e;
  e.method = meta.at("method").get<std::string>();
  if (flat.size() != 2 * meta.at("N").get<std::size_t>()) throw Error("chart.f64 size does not match chart.json");
  for (std::size_t i = 0; i + 1 < flat.size(); i += 2) e.points.push_back({flat[i], flat[i + 1]});
  return e;
}

std::string results_csv_header() { return "method,split,ct,tw,mae,ce90,n,k"; }

std::string results_csv_row(const eval::EvalReport& r) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%s,%s,%.6f,%.6f,%.6f,%.6f,%d,%d", r.method.c_str(), r.split.c_str(), r.ct, r.tw,
                r.mae, r.ce90, r.n, r.k_neighbors);
  return buf;
}

}  // namespace geochart::io

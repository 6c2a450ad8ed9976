#include "geochart/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_set>

namespace geochart::pipeline {

namespace {

enum SeedTag : std::uint64_t {
  kTrainTrajectory = 1,
  kTestTrajectory,
  kTrainData,
  kTestData,
  kEncoder,
  kMds,
  kSammon,
  kStudy,
};

const std::vector<std::string>& known_methods() {
  static const std::vector<std::string> m{"siamese_geo", "isomap_mds", "pca", "sammon"};
  return m;
}

void note(const Logger& log, const std::string& msg) {
  if (log) log(msg);
}

// Runs one stage; failures are re-raised with the stage name attached.
template <typename F>
auto stage(const std::string& name, const Logger& log, F&& f) -> decltype(f()) {
  note(log, "[" + name + "]");
  try {
    return f();
  } catch (const std::exception& e) {
    throw Error("stage '" + name + "' failed: " + e.what());
  }
}

class RunLock {
public:
  explicit RunLock(fs::path path) : path_(std::move(path)) {
    std::FILE* f = std::fopen(path_.c_str(), "wx");
    if (!f) throw Error("run directory is locked by another process (" + path_.string() + ")");
    std::fputs("locked\n", f);
    std::fclose(f);
  }
  ~RunLock() {
    std::error_code ec;
    fs::remove(path_, ec);
  }
  RunLock(const RunLock&) = delete;
  RunLock& operator=(const RunLock&) = delete;

private:
  fs::path path_;
};

std::string scatter_csv(const std::vector<Vec2>& chart, const std::vector<Vec2>& gt) {
  std::ostringstream os;
  os << "x,y,gt_x,gt_y\n";
  char buf[128];
  for (std::size_t i = 0; i < chart.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.9g,%.9g,%.9g,%.9g\n", chart[i].x, chart[i].y, gt[i].x, gt[i].y);
    os << buf;
  }
  return os.str();
}

}  // namespace

std::string to_string(Split s) { return s == Split::Train ? "train" : "test"; }

void PipelineConfig::validate() const {
  environment.validate();
  radio.validate(environment);
  train.validate();
  if (methods.empty()) throw Error("config: at least one method is required");
  for (const auto& m : methods) {
    if (!is_known_method(m)) throw Error("config: unknown method '" + m + "'");
  }
  if (graph_k < 1) throw Error("config: graph_k must be >= 1");
  if (window_length < 0) throw Error("config: window_length must be >= 0");
  if (out_of_sample_k < 1) throw Error("config: out_of_sample_k must be >= 1");
  if (study_pairs < 0) throw Error("config: study_pairs must be >= 0");
  if (study_bins.size() < 2 || !std::is_sorted(study_bins.begin(), study_bins.end())) {
    throw Error("config: study_bins must be at least two ascending edges");
  }
}

bool is_known_method(const std::string& m) {
  const auto& k = known_methods();
  return std::find(k.begin(), k.end(), m) != k.end();
}

PipelineConfig config_from_json(const json& j) {
  PipelineConfig c;
  try {
    if (j.contains("environment")) c.environment = io::environment_from_json(j.at("environment"));
    if (j.contains("radio")) c.radio = io::radio_from_json(j.at("radio"));
    if (j.contains("train_trajectory")) c.train_trajectory = io::trajectory_from_json(j.at("train_trajectory"));
    if (j.contains("test_trajectory")) c.test_trajectory = io::trajectory_from_json(j.at("test_trajectory"));
    if (j.contains("trajectory")) c.train_trajectory = io::trajectory_from_json(j.at("trajectory"));
    c.graph_k = j.value("graph_k", c.graph_k);
    c.window_length = j.value("window_length", c.window_length);
    c.cir_normalization = csi::row_norm_from_string(j.value("cir_normalization", csi::to_string(c.cir_normalization)));
    if (j.contains("train")) c.train = io::train_config_from_json(j.at("train"));
    if (j.contains("mds")) c.mds = io::mds_config_from_json(j.at("mds"));
    if (j.contains("sammon")) c.sammon = io::sammon_config_from_json(j.at("sammon"));
    c.methods = j.value("methods", c.methods);
    c.out_of_sample_k = j.value("out_of_sample_k", c.out_of_sample_k);
    c.out = j.value("out", c.out);
    c.seed = j.value("seed", c.seed);
    c.study_pairs = j.value("study_pairs", c.study_pairs);
    c.study_bins = j.value("study_bins", c.study_bins);
  } catch (const json::exception& e) {
    throw Error(std::string("invalid pipeline config: ") + e.what());
  }
  c.validate();
  return c;
}

json to_json(const PipelineConfig& c) {
  return {{"environment", io::to_json(c.environment)},
          {"radio", io::to_json(c.radio)},
          {"train_trajectory", io::to_json(c.train_trajectory)},
          {"test_trajectory", io::to_json(c.test_trajectory)},
          {"graph_k", c.graph_k},
          {"window_length", c.window_length},
          {"cir_normalization", csi::to_string(c.cir_normalization)},
          {"train", io::to_json(c.train)},
          {"mds", io::to_json(c.mds)},
          {"sammon", io::to_json(c.sammon)},
          {"methods", c.methods},
          {"out_of_sample_k", c.out_of_sample_k},
          {"out", c.out},
          {"seed", c.seed},
          {"study_pairs", c.study_pairs},
          {"study_bins", c.study_bins}};
}

PipelineConfig load_config(const fs::path& path) {
  if (!fs::exists(path)) throw Error("config file not found: " + path.string());
  return config_from_json(io::read_json(path));
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) { return make_stream(seed, tag)(); }

std::uint64_t encoder_seed(const PipelineConfig& cfg) { return derive_seed(cfg.seed, kEncoder); }

int resolved_window(const PipelineConfig& cfg) {
  return cfg.window_length > 0 ? cfg.window_length : csi::default_window(cfg.environment, cfg.radio);
}

sim::Dataset simulate_split(const PipelineConfig& cfg, Split split) {
  const bool train = split == Split::Train;
  Rng rng = make_stream(cfg.seed, train ? kTrainTrajectory : kTestTrajectory);
  const auto traj = sim::generate_trajectory(cfg.environment, train ? cfg.train_trajectory : cfg.test_trajectory, rng);
  return sim::generate_dataset(cfg.environment, cfg.radio, traj, derive_seed(cfg.seed, train ? kTrainData : kTestData));
}

std::string cmd_simulate(const PipelineConfig& cfg, const fs::path& out, Split split) {
  const sim::Dataset ds = simulate_split(cfg, split);
  io::write_dataset(out, ds);
  std::ostringstream os;
  os << "N = " << ds.snapshots.size() << "\n"
     << "N_b = " << ds.num_stations() << "\n"
     << "T = " << ds.radio.cir_length << "\n"
     << "bandwidth = " << ds.radio.bandwidth << " Hz\n"
     << "sample_rate = " << ds.radio.sample_rate << " Hz\n"
     << "mode = " << sim::to_string(ds.radio.mode) << "\n"
     << "split = " << to_string(split) << "\n"
     << "seed = " << cfg.seed << "\n";
  io::write_text(out / "summary.txt", os.str());
  return io::dataset_hash(out);
}

std::vector<csi::AlignedTensor> aligned_tensors(const sim::Dataset& ds, int window_length, csi::RowNorm norm) {
  return csi::preprocess_all(ds.snapshots, ds.radio.sample_rate, window_length, norm);
}

std::vector<Vec2> positions(const sim::Dataset& ds) {
  std::vector<Vec2> out;
  out.reserve(ds.snapshots.size());
  for (const auto& s : ds.snapshots) out.push_back(s.position);
  return out;
}

std::vector<double> cross_distances(const std::vector<csi::AlignedTensor>& queries,
                                    const std::vector<csi::AlignedTensor>& references) {
  std::vector<double> out(queries.size() * references.size());
  for (std::size_t q = 0; q < queries.size(); ++q) {
    for (std::size_t r = 0; r < references.size(); ++r) out[q * references.size() + r] = csi::cir_distance(queries[q], references[r]);
  }
  return out;
}

graph::DistanceMatrix geodesics_checked(const graph::DistanceMatrix& dpw, int k) {
  const graph::NeighborGraph g = graph::knn_graph(dpw, k);
  const auto comps = graph::connected_components(g);
  if (comps.size() > 1) {
    std::ostringstream os;
    os << "kNN graph with k = " << k << " has " << comps.size() << " components (sizes";
    for (const auto& c : comps) os << " " << c.size();
    os << "); smallest connecting k is " << graph::minimal_connecting_k(dpw);
    throw Error(os.str());
  }
  return graph::geodesic_matrix(g);
}

void cmd_distances(const fs::path& dataset_dir, const fs::path& out_blob, int window_length, csi::RowNorm norm) {
  const sim::Dataset ds = io::read_dataset(dataset_dir);
  const int w = window_length > 0 ? window_length : csi::default_window(ds.environment, ds.radio);
  const auto d = graph::pairwise_matrix(aligned_tensors(ds, w, norm));
  io::write_matrix(out_blob, d, 0, io::dataset_hash(dataset_dir));
}

void cmd_geodesic(const fs::path& dpw_blob, int k, const fs::path& out_blob) {
  const auto dpw = io::read_matrix(dpw_blob);
  fs::path sidecar = dpw_blob;
  sidecar.replace_extension(".json");
  const auto meta = io::read_json(sidecar);
  io::write_matrix(out_blob, geodesics_checked(dpw, k), k, meta.value("source", std::string()));
}

void cmd_train(const fs::path& dataset_dir, const fs::path& dgeo_blob, const chart::TrainConfig& train_cfg,
               int window_length, csi::RowNorm norm, const fs::path& out_dir) {
  const sim::Dataset ds = io::read_dataset(dataset_dir);
  const int w = window_length > 0 ? window_length : csi::default_window(ds.environment, ds.radio);
  const auto dgeo = io::read_matrix(dgeo_blob);
  const auto result = chart::train(aligned_tensors(ds, w, norm), dgeo, train_cfg);
  io::write_encoder(out_dir, result.params, w, norm);
  io::write_json(out_dir / "train_log.json", {{"loss_history", result.loss_history}, {"epochs_run", result.epochs_run}});
}

void cmd_embed(const fs::path& encoder_dir, const fs::path& dataset_dir, const fs::path& out_dir) {
  int w = 0;
  csi::RowNorm norm = csi::RowNorm::None;
  const auto params = io::read_encoder(encoder_dir, &w, &norm);
  const sim::Dataset ds = io::read_dataset(dataset_dir);
  if (w <= 0) w = csi::default_window(ds.environment, ds.radio);
  io::write_embedding(out_dir, chart::embed_dataset(params, aligned_tensors(ds, w, norm)));
}

eval::EvalReport cmd_evaluate(const fs::path& chart_dir, const fs::path& dataset_dir, const fs::path& dpw_blob,
                              const fs::path& fit_chart_dir, const fs::path& fit_dataset_dir) {
  const auto emb = io::read_embedding(chart_dir);
  const auto gt = positions(io::read_dataset(dataset_dir));
  const auto dpw = io::read_matrix(dpw_blob);
  eval::AffineTransform t;
  if (fit_chart_dir.empty()) {
    t = eval::fit_affine(emb.points, gt);
  } else {
    const fs::path fd = fit_dataset_dir.empty() ? dataset_dir : fit_dataset_dir;
    t = eval::fit_affine(io::read_embedding(fit_chart_dir).points, positions(io::read_dataset(fd)));
  }
  eval::EvalReport r = eval::evaluate(emb, dpw, gt, t);
  r.split = fit_chart_dir.empty() ? "train" : "test";
  io::write_json(chart_dir / "report.json", io::to_json(r));
  return r;
}

PipelineResult cmd_pipeline(const PipelineConfig& cfg, const Logger& log) {
  cfg.validate();
  PipelineResult result;
  result.run_dir = cfg.out;
  const fs::path run = cfg.out;
  fs::create_directories(run);
  RunLock lock(run / "run.lock");
  std::error_code ec;
  fs::remove(run / "FAILED", ec);
  const auto t0 = std::chrono::steady_clock::now();
  json timings = json::object();
  auto lap = [&](const std::string& name, auto start) {
    timings[name] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };

  try {
    const json cfg_json = to_json(cfg);
    io::write_json(run / "config.json", cfg_json);
    const int window = resolved_window(cfg);

    auto t = std::chrono::steady_clock::now();
    const std::string train_hash = stage("simulate train", log, [&] { return cmd_simulate(cfg, run / "data" / "train", Split::Train); });
    const std::string test_hash = stage("simulate test", log, [&] { return cmd_simulate(cfg, run / "data" / "test", Split::Test); });
    lap("simulate", t);
    io::write_json(run / "version.json", {{"version", kVersion},
                                          {"config_hash", io::fnv1a_hex(std::span<const std::uint8_t>(
                                                              reinterpret_cast<const std::uint8_t*>(cfg_json.dump().data()),
                                                              cfg_json.dump().size()))},
                                          {"seed", cfg.seed},
                                          {"train_dataset", train_hash},
                                          {"test_dataset", test_hash}});

    // Everything downstream works on the stored 32-bit data.
    t = std::chrono::steady_clock::now();
    const sim::Dataset train_ds = stage("load", log, [&] { return io::read_dataset(run / "data" / "train"); });
    const sim::Dataset test_ds = stage("load", log, [&] { return io::read_dataset(run / "data" / "test"); });
    const auto train_x = stage("preprocess", log, [&] { return aligned_tensors(train_ds, window, cfg.cir_normalization); });
    const auto test_x = stage("preprocess", log, [&] { return aligned_tensors(test_ds, window, cfg.cir_normalization); });
    const auto train_gt = positions(train_ds);
    const auto test_gt = positions(test_ds);
    lap("preprocess", t);

    t = std::chrono::steady_clock::now();
    const auto dpw = stage("distances", log, [&] { return graph::pairwise_matrix(train_x); });
    const auto dpw_test = stage("distances", log, [&] { return graph::pairwise_matrix(test_x); });
    io::write_matrix(run / "dpw.f64", dpw, 0, train_hash);
    io::write_matrix(run / "dpw_test.f64", dpw_test, 0, test_hash);
    lap("distances", t);

    const bool need_geo = std::find(cfg.methods.begin(), cfg.methods.end(), "siamese_geo") != cfg.methods.end() ||
                          std::find(cfg.methods.begin(), cfg.methods.end(), "isomap_mds") != cfg.methods.end();
    bool need_cross = false;
    for (const auto& m : cfg.methods) need_cross = need_cross || m == "isomap_mds" || m == "sammon";

    graph::DistanceMatrix dgeo;
    if (need_geo) {
      t = std::chrono::steady_clock::now();
      dgeo = stage("geodesic", log, [&] { return geodesics_checked(dpw, cfg.graph_k); });
      io::write_matrix(run / "dgeo.f64", dgeo, cfg.graph_k, train_hash);
      lap("geodesic", t);
    }
    std::vector<double> cross;
    if (need_cross) cross = stage("cross distances", log, [&] { return cross_distances(test_x, train_x); });

    std::string csv = io::results_csv_header() + "\n";
    json reports = json::array();
    for (const auto& method : cfg.methods) {
      t = std::chrono::steady_clock::now();
      MethodCharts charts = stage(method, log, [&]() -> MethodCharts {
        MethodCharts c;
        if (method == "siamese_geo") {
          chart::TrainConfig tc = cfg.train;
          tc.seed = encoder_seed(cfg);
          const auto trained = chart::train(train_x, dgeo, tc);
          io::write_encoder(run / method / "encoder", trained.params, window, cfg.cir_normalization);
          io::write_json(run / method / "train_log.json",
                         {{"loss_history", trained.loss_history}, {"epochs_run", trained.epochs_run}});
          c.train = chart::embed_dataset(trained.params, train_x);
          c.test = chart::embed_dataset(trained.params, test_x);
        } else if (method == "pca") {
          const auto model = chart::fit_pca(chart::stack_inputs(train_x));
          c.train = {chart::pca_project(model, chart::stack_inputs(train_x)), "pca"};
          c.test = {chart::pca_project(model, chart::stack_inputs(test_x)), "pca"};
        } else if (method == "isomap_mds") {
          chart::MdsConfig mc = cfg.mds;
          mc.seed = derive_seed(cfg.seed, kMds);
          c.train = chart::mds_embed(dgeo, mc).embedding;
          c.test = {chart::extend_out_of_sample(c.train.points, cross, cfg.out_of_sample_k), method};
        } else {
          chart::SammonConfig sc = cfg.sammon;
          sc.seed = derive_seed(cfg.seed, kSammon);
          c.train = chart::sammon_embed(dpw, sc).embedding;
          c.test = {chart::extend_out_of_sample(c.train.points, cross, cfg.out_of_sample_k), method};
        }
        return c;
      });
      stage(method + " evaluate", log, [&] {
        const auto transform = eval::fit_affine(charts.train.points, train_gt);
        eval::EvalReport tr = eval::evaluate(charts.train, dpw, train_gt, transform);
        tr.split = "train";
        eval::EvalReport te = eval::evaluate(charts.test, dpw_test, test_gt, transform);
        te.split = "test";
        for (auto* r : {&tr, &te}) {
          const fs::path dir = run / method / r->split;
          const auto& emb = r == &tr ? charts.train : charts.test;
          const auto& gt = r == &tr ? train_gt : test_gt;
          io::write_embedding(dir, emb);
          io::write_text(dir / "scatter.csv", scatter_csv(emb.points, gt));
          io::write_json(dir / "report.json", io::to_json(*r));
          csv += io::results_csv_row(*r) + "\n";
          reports.push_back(io::to_json(*r));
          result.reports.push_back(*r);
          note(log, "  " + io::results_csv_row(*r));
        }
        return 0;
      });
      lap(method, t);
    }
    io::write_text(run / "results.csv", csv);
    io::write_json(run / "results.json", reports);
    lap("total", t0);
    io::write_json(run / "timings.json", timings);
  } catch (const std::exception& e) {
    io::write_text(run / "FAILED", std::string(e.what()) + "\n");
    throw;
  }
  return result;
}

StudyResult distance_study(const std::vector<Vec2>& pos, const graph::DistanceMatrix& dpw,
                           const graph::DistanceMatrix& dgeo, std::int64_t m, std::uint64_t seed,
                           const std::vector<double>& bin_edges) {
  const auto n = static_cast<std::int64_t>(pos.size());
  if (dpw.size() != n || dgeo.size() != n) throw Error("study: matrix sizes do not match the dataset");
  if (m < 0) throw Error("study: negative pair count");
  const std::int64_t total = n * (n - 1) / 2;
  StudyResult out;
  std::vector<std::int64_t> picks;
  if (m >= total) {
    out.clamped = m > total;
    picks.resize(static_cast<std::size_t>(total));
    for (std::int64_t p = 0; p < total; ++p) picks[static_cast<std::size_t>(p)] = p;
  } else {
    // Floyd's sampling of m distinct linear pair indices.
    Rng rng = make_stream(seed, kStudy);
    std::unordered_set<std::int64_t> chosen;
    for (std::int64_t r = total - m; r < total; ++r) {
      std::uniform_int_distribution<std::int64_t> u(0, r);
      const std::int64_t v = u(rng);
      if (!chosen.insert(v).second) chosen.insert(r);
    }
    picks.assign(chosen.begin(), chosen.end());
    std::sort(picks.begin(), picks.end());
  }
  // Row i owns linear indices [off(i), off(i+1)).
  auto off = [n](std::int64_t i) { return i * (2 * n - i - 1) / 2; };
  out.pairs.reserve(picks.size());
  std::int64_t row = 0;
  for (std::int64_t p : picks) {
    while (off(row + 1) <= p) ++row;
    const auto i = static_cast<int>(row);
    const auto j = static_cast<int>(row + 1 + (p - off(row)));
    out.pairs.push_back({i, j, distance(pos[i], pos[j]), dpw(i, j), dgeo(i, j)});
  }

  auto correlate = [&](double lo, double hi, bool last, StudyBin& b) {
    std::vector<double> e, c, g;
    for (const auto& pr : out.pairs) {
      if (pr.d_euc >= lo && (pr.d_euc < hi || (last && pr.d_euc <= hi))) {
        e.push_back(pr.d_euc);
        c.push_back(pr.d_cir);
        g.push_back(pr.d_geo);
      }
    }
    b.count = static_cast<std::int64_t>(e.size());
    b.r_cir = eval::pearson(e, c);
    b.r_geo = eval::pearson(e, g);
  };
  for (std::size_t b = 0; b + 1 < bin_edges.size(); ++b) {
    StudyBin bin{bin_edges[b], bin_edges[b + 1]};
    correlate(bin.lo, bin.hi, b + 2 == bin_edges.size(), bin);
    out.bins.push_back(bin);
  }
  std::vector<double> e, c, g;
  for (const auto& pr : out.pairs) {
    e.push_back(pr.d_euc);
    c.push_back(pr.d_cir);
    g.push_back(pr.d_geo);
  }
  out.r_cir = eval::pearson(e, c);
  out.r_geo = eval::pearson(e, g);
  return out;
}

StudyResult cmd_study(const PipelineConfig& cfg, const fs::path& dataset_dir, const fs::path& out, const Logger& log) {
  fs::create_directories(out);
  fs::path data = dataset_dir;
  if (data.empty()) {
    data = out / "data";
    stage("simulate", log, [&] { return cmd_simulate(cfg, data, Split::Train); });
  }
  const sim::Dataset ds = stage("load", log, [&] { return io::read_dataset(data); });
  const int window = cfg.window_length > 0 ? cfg.window_length : csi::default_window(ds.environment, ds.radio);
  const auto x = stage("preprocess", log, [&] { return aligned_tensors(ds, window, cfg.cir_normalization); });
  const auto dpw = stage("distances", log, [&] { return graph::pairwise_matrix(x); });
  const auto dgeo = stage("geodesic", log, [&] { return geodesics_checked(dpw, cfg.graph_k); });
  const std::int64_t n = static_cast<std::int64_t>(ds.snapshots.size());
  if (cfg.study_pairs > n * (n - 1) / 2) {
    note(log, "warning: study_pairs = " + std::to_string(cfg.study_pairs) + " exceeds N(N-1)/2 = " +
                  std::to_string(n * (n - 1) / 2) + "; using all pairs");
  }
  StudyResult r = distance_study(positions(ds), dpw, dgeo, cfg.study_pairs, cfg.seed, cfg.study_bins);

  std::ostringstream os;
  os << "i,j,d_euc,d_cir,d_geo\n";
  char buf[160];
  for (const auto& p : r.pairs) {
    std::snprintf(buf, sizeof(buf), "%d,%d,%.9g,%.9g,%.9g\n", p.i, p.j, p.d_euc, p.d_cir, p.d_geo);
    os << buf;
  }
  io::write_text(out / "study.csv", os.str());
  json bins = json::array();
  for (const auto& b : r.bins) {
    bins.push_back({{"lo", b.lo}, {"hi", b.hi}, {"count", b.count}, {"r_cir", b.r_cir}, {"r_geo", b.r_geo}});
  }
  io::write_json(out / "study.json", {{"pairs", r.pairs.size()},
                                      {"clamped", r.clamped},
                                      {"r_cir", r.r_cir},
                                      {"r_geo", r.r_geo},
                                      {"bins", bins},
                                      {"graph_k", cfg.graph_k},
                                      {"dataset", io::dataset_hash(data)}});
  return r;
}

}  // namespace geochart::pipeline

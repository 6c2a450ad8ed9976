#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <iterator>
#include <random>
#include <set>
#include <sstream>

#include "geochart/pipeline.hpp"

using namespace geochart;
namespace gp = geochart::pipeline;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("geochart_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

int count_lines(const std::string& s) { return static_cast<int>(std::count(s.begin(), s.end(), '\n')); }

gp::PipelineConfig small_config(const fs::path& out) {
  gp::PipelineConfig cfg;
  cfg.train_trajectory.n = 300;
  cfg.test_trajectory.n = 100;
  cfg.train.epochs = 3;
  cfg.train.pairs_per_epoch = 512;
  cfg.train.hidden = {32, 16};
  cfg.sammon.max_iterations = 30;
  cfg.mds.max_iterations = 30;
  cfg.out = out.string();
  return cfg;
}

}  // namespace

TEST_CASE("binary and json round trips") {
  const auto dir = scratch("io");
  fs::create_directories(dir);
  const std::vector<double> v{1.5, -2.25, 1e-300, 3.0};
  io::write_f64(dir / "a.f64", v);
  CHECK(io::read_f64(dir / "a.f64") == v);
  CHECK(fs::file_size(dir / "a.f64") == 32);
  const std::vector<float> f{1.5f, -0.125f};
  io::write_f32(dir / "b.f32", f);
  CHECK(io::read_f32(dir / "b.f32") == f);
  CHECK_THROWS_AS(io::read_f64(dir / "missing.f64"), Error);

  const auto env = sim::default_environment();
  const auto env2 = io::environment_from_json(io::to_json(env));
  CHECK(io::to_json(env2) == io::to_json(env));
  sim::RadioConfig radio;
  radio.mode = sim::Mode::TDoA;
  CHECK(io::to_json(io::radio_from_json(io::to_json(radio))) == io::to_json(radio));

  gp::PipelineConfig cfg;
  cfg.methods = {"pca"};
  cfg.seed = 99;
  const auto back = gp::config_from_json(gp::to_json(cfg));
  CHECK(gp::to_json(back) == gp::to_json(cfg));
  CHECK_THROWS_AS(gp::config_from_json({{"methods", {"tsne"}}}).validate(), Error);
}

TEST_CASE("dataset, matrix, encoder and embedding round trips") {
  const auto dir = scratch("io2");
  const auto env = sim::default_environment();
  sim::RadioConfig radio;
  sim::TrajectorySpec spec;
  spec.n = 20;
  Rng rng(1);
  const auto ds = sim::generate_dataset(env, radio, sim::generate_trajectory(env, spec, rng), 4);
  io::write_dataset(dir / "ds", ds);
  const auto back = io::read_dataset(dir / "ds");
  REQUIRE(back.snapshots.size() == 20);
  for (std::size_t i = 0; i < 20; ++i) {
    CHECK(back.snapshots[i].position == ds.snapshots[i].position);
    CHECK(back.snapshots[i].measured_toa == ds.snapshots[i].measured_toa);
    for (std::size_t c = 0; c < ds.snapshots[i].cirs.size(); ++c)
      CHECK(back.snapshots[i].cirs[c] == static_cast<double>(static_cast<float>(ds.snapshots[i].cirs[c])));
  }

  const auto d = graph::euclidean_matrix({{0, 0}, {1, 0}, {0, 3}});
  io::write_matrix(dir / "d.f64", d, 0, "x");
  const auto d2 = io::read_matrix(dir / "d.f64");
  CHECK(d2.values() == d.values());
  CHECK(d2.kind() == d.kind());

  const auto p = chart::init_encoder({10, {4}, 2}, 3);
  io::write_encoder(dir / "enc", p, 77, csi::RowNorm::L1);
  int w = 0;
  csi::RowNorm norm = csi::RowNorm::None;
  const auto p2 = io::read_encoder(dir / "enc", &w, &norm);
  CHECK(p2.flatten() == p.flatten());
  CHECK(w == 77);
  CHECK(norm == csi::RowNorm::L1);

  chart::Embedding e{{{1, 2}, {3, 4}}, "pca"};
  io::write_embedding(dir / "chart", e);
  const auto e2 = io::read_embedding(dir / "chart");
  CHECK(e2.points == e.points);
  CHECK(e2.method == "pca");
}

TEST_CASE("simulate: grid counting, determinism, TDoA convention") {
  const auto dir = scratch("sim");
  gp::PipelineConfig cfg;
  cfg.environment = sim::open_environment(10, 10, 4);
  cfg.train_trajectory = {sim::TrajectoryKind::Grid, 0};
  cfg.train_trajectory.spacing = 1.0;
  cfg.radio.noise_std = 0.01;
  const auto h1 = gp::cmd_simulate(cfg, dir / "a");
  const auto h2 = gp::cmd_simulate(cfg, dir / "b");
  CHECK(io::read_json(dir / "a" / "meta.json").at("N") == 121);
  CHECK(h1 == h2);
  for (const char* f : {"cirs.f32", "toa.f64", "pos.f64", "ts.f64"}) CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));
  CHECK(fs::exists(dir / "a" / "summary.txt"));

  cfg.radio.mode = sim::Mode::TDoA;
  gp::cmd_simulate(cfg, dir / "c");
  const auto toa = io::read_f64(dir / "c" / "toa.f64");
  REQUIRE(toa.size() == 121 * 4);
  for (int i = 0; i < 121; ++i) CHECK(std::count(toa.begin() + 4 * i, toa.begin() + 4 * i + 4, 0.0) == 1);
}

TEST_CASE("pipeline: single method writes two result rows and the scatter files") {
  const auto dir = scratch("pca");
  auto cfg = small_config(dir);
  cfg.methods = {"pca"};
  const auto res = gp::cmd_pipeline(cfg);
  const auto csv = slurp(dir / "results.csv");
  CHECK(count_lines(csv) == 3);
  CHECK(csv.rfind(io::results_csv_header(), 0) == 0);
  CHECK(res.reports.size() == 2);
  CHECK(fs::exists(dir / "pca" / "train" / "chart.f64"));
  const auto scatter = slurp(dir / "pca" / "test" / "scatter.csv");
  CHECK(scatter.rfind("x,y,gt_x,gt_y\n", 0) == 0);
  CHECK(count_lines(scatter) == 101);
  CHECK(fs::exists(dir / "config.json"));
  CHECK(fs::exists(dir / "version.json"));
  CHECK_FALSE(fs::exists(dir / "run.lock"));
  CHECK_FALSE(fs::exists(dir / "FAILED"));
}

TEST_CASE("pipeline: same seed gives identical results, stored config reproduces") {
  const auto a = scratch("det_a");
  const auto b = scratch("det_b");
  auto cfg = small_config(a);
  cfg.methods = {"siamese_geo", "pca", "isomap_mds", "sammon"};
  gp::cmd_pipeline(cfg);
  auto again = gp::load_config(a / "config.json");
  again.out = b.string();
  gp::cmd_pipeline(again);
  CHECK(slurp(a / "results.csv") == slurp(b / "results.csv"));
  CHECK(count_lines(slurp(a / "results.csv")) == 9);
}

TEST_CASE("pipeline: locked run directories and failing stages") {
  const auto dir = scratch("lock");
  fs::create_directories(dir);
  { std::ofstream(dir / "run.lock") << "locked\n"; }
  auto cfg = small_config(dir);
  cfg.methods = {"pca"};
  CHECK_THROWS_WITH_AS(gp::cmd_pipeline(cfg), doctest::Contains("locked"), Error);
  fs::remove(dir / "run.lock");

  cfg.window_length = 50;  // too short for the environment
  CHECK_THROWS_WITH_AS(gp::cmd_pipeline(cfg), doctest::Contains("stage"), Error);
  CHECK(fs::exists(dir / "FAILED"));
}

TEST_CASE("study: empty sample, clamping and bins") {
  const auto dir = scratch("study");
  gp::PipelineConfig cfg;
  cfg.environment = sim::open_environment(10, 10, 4);
  cfg.train_trajectory = {sim::TrajectoryKind::Grid, 0};
  cfg.train_trajectory.spacing = 1.0;
  cfg.study_pairs = 0;
  const auto r0 = gp::cmd_study(cfg, {}, dir / "a");
  CHECK(r0.pairs.empty());
  CHECK(slurp(dir / "a" / "study.csv") == "i,j,d_euc,d_cir,d_geo\n");

  cfg.study_pairs = 1000000;
  const auto r1 = gp::cmd_study(cfg, dir / "a" / "data", dir / "b");
  CHECK(r1.clamped);
  CHECK(r1.pairs.size() == 121 * 120 / 2);
  std::set<std::pair<int, int>> seen;
  for (const auto& p : r1.pairs) {
    CHECK(p.i < p.j);
    seen.insert({p.i, p.j});
  }
  CHECK(seen.size() == r1.pairs.size());

  cfg.study_pairs = 500;
  const auto r2 = gp::cmd_study(cfg, dir / "a" / "data", dir / "c");
  CHECK_FALSE(r2.clamped);
  CHECK(r2.pairs.size() == 500);
  std::int64_t binned = 0;
  for (const auto& b : r2.bins) binned += b.count;
  CHECK(binned <= 500);
}

TEST_CASE("seed derivation separates stages") {
  CHECK(gp::derive_seed(1, 1) != gp::derive_seed(1, 2));
  CHECK(gp::derive_seed(1, 1) != gp::derive_seed(2, 1));
  CHECK(gp::derive_seed(5, 3) == gp::derive_seed(5, 3));
}

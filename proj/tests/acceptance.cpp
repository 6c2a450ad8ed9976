// Acceptance suite: one PASS/FAIL line per criterion, with measured values,
// thresholds and runtimes. Exit status is nonzero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <random>
#include <sstream>
#include <string>

#include "geochart/pipeline.hpp"
#include "oracles.hpp"

using namespace geochart;
namespace gp = geochart::pipeline;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  const char* name;
  double limit_s;
  std::function<Outcome()> run;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

// Noiseless single-path study set: 6 stations, 500 MHz pulse, 20 m x 20 m,
// stratified (jittered) 0.52 m grid, about 1500 points.
struct StudySet {
  std::vector<Vec2> pos;
  graph::DistanceMatrix dpw;
  graph::DistanceMatrix dgeo;
};

gp::PipelineConfig study_config() {
  gp::PipelineConfig cfg;
  cfg.environment = sim::open_environment(20.0, 20.0, 6);
  cfg.radio.max_reflection_order = 0;
  cfg.radio.noise_std = 0.0;
  cfg.radio.toa_noise_std = 0.0;
  cfg.train_trajectory = {sim::TrajectoryKind::Grid, 0};
  cfg.train_trajectory.spacing = 0.52;
  cfg.train_trajectory.jitter = 1.0;
  cfg.graph_k = 15;
  cfg.seed = 1;
  return cfg;
}

StudySet& study_set() {
  static StudySet s = [] {
    const auto cfg = study_config();
    const auto ds = gp::simulate_split(cfg, gp::Split::Train);
    StudySet out;
    out.pos = gp::positions(ds);
    out.dpw = graph::pairwise_matrix(gp::aligned_tensors(ds, gp::resolved_window(cfg), cfg.cir_normalization));
    return out;
  }();
  return s;
}

double pearson_where(const std::vector<Vec2>& pos, const graph::DistanceMatrix& d, double lo, double hi,
                     std::size_t* count) {
  std::vector<double> e, c;
  const int n = d.size();
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const double de = distance(pos[i], pos[j]);
      if (de >= lo && de <= hi) {
        e.push_back(de);
        c.push_back(d(i, j));
      }
    }
  *count = e.size();
  return eval::pearson(e, c);
}

Outcome local_linearity() {
  const auto& s = study_set();
  std::size_t near = 0, far = 0;
  const double r_near = pearson_where(s.pos, s.dpw, 0.0, 1.0, &near);
  const double r_far = pearson_where(s.pos, s.dpw, 10.0, 20.0, &far);
  Outcome o;
  o.pass = r_near >= 0.95 && r_far <= 0.5;
  o.detail = "N=" + std::to_string(s.pos.size()) + " r(d<=1m)=" + fmt("%.4f", r_near) + " (>=0.95, " +
             std::to_string(near) + " pairs) r(10..20m)=" + fmt("%.4f", r_far) + " (<=0.5, " + std::to_string(far) +
             " pairs)";
  return o;
}

Outcome geodesic_linearity() {
  auto& s = study_set();
  s.dgeo = gp::geodesics_checked(s.dpw, 15);
  std::size_t all = 0;
  const double r = pearson_where(s.pos, s.dgeo, 0.0, 1e9, &all);
  return {r >= 0.97, "k=15 r(all pairs)=" + fmt("%.4f", r) + " (>=0.97, " + std::to_string(all) + " pairs)"};
}

Outcome shortest_paths() {
  std::mt19937_64 gen(3);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int n = std::uniform_int_distribution<int>(2, 64)(gen);
    std::uniform_real_distribution<double> w(0.01, 10.0);
    graph::NeighborGraph g;
    g.n = n;
    g.adjacency.resize(n);
    std::vector<oracle::WeightedEdge> edges;
    auto add = [&](int a, int b) {
      if (a == b || g.has_edge(a, b)) return;
      const double x = w(gen);
      g.adjacency[a].push_back({b, x});
      g.adjacency[b].push_back({a, x});
      edges.push_back({a, b, x});
    };
    for (int i = 1; i < n; ++i) add(i, std::uniform_int_distribution<int>(0, i - 1)(gen));
    std::uniform_int_distribution<int> node(0, n - 1);
    const int extra = std::uniform_int_distribution<int>(0, 3 * n)(gen);
    for (int e = 0; e < extra; ++e) add(node(gen), node(gen));
    for (auto& adj : g.adjacency)
      std::sort(adj.begin(), adj.end(), [](graph::Edge l, graph::Edge r) { return l.to < r.to; });
    const auto got = graph::geodesic_matrix(g);
    const auto want = oracle::floyd_warshall(n, edges);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) worst = std::max(worst, std::abs(got(i, j) - want[i][j]));
  }
  return {worst <= 1e-9, "100 graphs, max |dijkstra - floyd_warshall| = " + fmt("%.3g", worst) + " (<=1e-9)"};
}

Outcome rank_measures() {
  std::mt19937_64 gen(4);
  double worst = 0.0;
  bool identity_exact = true;
  for (int trial = 0; trial < 50; ++trial) {
    const int n = std::uniform_int_distribution<int>(5, 200)(gen);
    std::uniform_real_distribution<double> u(0.0, 10.0);
    std::normal_distribution<double> noise(0.0, 1.5);
    std::vector<Vec2> a(n), b(n);
    for (int i = 0; i < n; ++i) {
      a[i] = {u(gen), u(gen)};
      b[i] = {a[i].x + noise(gen), a[i].y + noise(gen)};
    }
    const auto da = graph::euclidean_matrix(a);
    const auto db = graph::euclidean_matrix(b);
    oracle::Matrix oa = oracle::euclidean(a), ob = oracle::euclidean(b);
    const int kmax = (2 * n - 2) / 3;
    const int k = std::uniform_int_distribution<int>(1, std::max(1, std::min(kmax, n / 4 + 1)))(gen);
    worst = std::max(worst, std::abs(eval::continuity(da, db, k) - oracle::continuity(oa, ob, k)));
    worst = std::max(worst, std::abs(eval::trustworthiness(da, db, k) - oracle::trustworthiness(oa, ob, k)));
    identity_exact = identity_exact && eval::continuity(da, da, k) == 1.0 && eval::trustworthiness(da, da, k) == 1.0;
  }
  return {worst <= 1e-12 && identity_exact, "50 instances, max |CT/TW - direct| = " + fmt("%.3g", worst) +
                                                " (<=1e-12), identity exactly 1.0: " +
                                                (identity_exact ? "yes" : "no")};
}

Outcome gradients() {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  for (int c = 0; c < 20; ++c) {
    auto p = chart::init_encoder({40, {16, 8}, 2}, 1000 + c);
    // Random biases keep the evaluation point away from rectifier kinks.
    for (auto& l : p.layers)
      for (int r = 0; r < l.bias.size(); ++r) l.bias(r) = u(gen) - 0.5;
    std::vector<double> xi(40), xj(40);
    for (double& v : xi) v = u(gen);
    for (double& v : xj) v = u(gen);
    const double d = 3.0 * u(gen);
    const auto analytic = chart::flatten_layers(chart::siamese_step(p, xi, xj, d).grad);
    const auto f = [&](const std::vector<double>& theta) {
      auto q = p;
      q.assign(theta);
      return chart::siamese_step(q, xi, xj, d).loss;
    };
    const auto numeric = oracle::finite_difference(f, p.flatten(), 1e-6);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < numeric.size(); ++i) {
      num += (analytic[i] - numeric[i]) * (analytic[i] - numeric[i]);
      den += numeric[i] * numeric[i];
    }
    worst = std::max(worst, std::sqrt(num / std::max(den, 1e-300)));
  }
  return {worst <= 1e-4, "20 cases, max relative error = " + fmt("%.3g", worst) + " (<=1e-4)"};
}

Outcome affine() {
  std::mt19937_64 gen(6);
  std::uniform_real_distribution<double> u(0.0, 20.0), a(-2.0, 2.0);
  std::normal_distribution<double> noise(0.0, 0.8);
  std::vector<Vec2> gt(300), chart(300), noisy(300);
  const double th = 1.1, s = 0.37;
  for (int i = 0; i < 300; ++i) {
    gt[i] = {u(gen), u(gen)};
    chart[i] = {s * (std::cos(th) * gt[i].x - std::sin(th) * gt[i].y) - 3.0,
                s * (std::sin(th) * gt[i].x + std::cos(th) * gt[i].y) + 8.0};
    noisy[i] = {chart[i].x + noise(gen), chart[i].y + noise(gen)};
  }
  const double exact = eval::position_errors(chart, eval::fit_affine(chart, gt), gt).mae;
  const double base = eval::position_errors(noisy, eval::fit_affine(noisy, gt), gt).mae;
  double drift = 0.0;
  for (int t = 0; t < 20; ++t) {
    double m00, m01, m10, m11;
    do {
      m00 = a(gen), m01 = a(gen), m10 = a(gen), m11 = a(gen);
    } while (std::abs(m00 * m11 - m01 * m10) < 0.1);
    const double t0 = 10.0 * a(gen), t1 = 10.0 * a(gen);
    std::vector<Vec2> warped;
    for (auto p : noisy) warped.push_back({m00 * p.x + m01 * p.y + t0, m10 * p.x + m11 * p.y + t1});
    drift = std::max(drift, std::abs(eval::position_errors(warped, eval::fit_affine(warped, gt), gt).mae - base));
  }
  return {exact <= 1e-6 && drift <= 1e-9, "exact recovery MAE = " + fmt("%.3g", exact) +
                                              " m (<=1e-6), MAE change under 20 affine pre-warps = " +
                                              fmt("%.3g", drift) + " m (<=1e-9)"};
}

Outcome toa_bound() {
  std::mt19937_64 gen(7);
  std::uniform_real_distribution<double> u(0.0, 20.0);
  int violations = 0, checked = 0;
  double min_gap = 1e300;
  for (int t = 0; t < 10000; ++t) {
    const Vec2 xi{u(gen), u(gen)}, xj{u(gen), u(gen)}, b1{u(gen), u(gen)}, b2{u(gen), u(gen)};
    if (xi == xj || b1 == b2) continue;
    ++checked;
    const auto e = sim::toa_error_terms(xi, xj, b1, b2);
    const double gap = 2.0 * e.d_euc - kSpeedOfLight * (e.eps1 + e.eps2);
    min_gap = std::min(min_gap, gap / e.d_euc);
    if (!(gap > 0.0)) ++violations;
  }
  return {violations == 0 && checked == 10000,
          std::to_string(checked) + " geometries, violations of 2 d > c (eps1 + eps2): " + std::to_string(violations) +
              ", min relative slack " + fmt("%.3g", min_gap)};
}

Outcome metric_axioms() {
  std::mt19937_64 gen(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> rows(1, 6), cols(1, 80);
  int bad = 0;
  for (int t = 0; t < 1000; ++t) {
    const int r = rows(gen), c = cols(gen);
    csi::AlignedTensor x[3];
    for (auto& v : x) {
      v.rows = r;
      v.cols = c;
      v.sample_rate = 1e9;
      for (int i = 0; i < r * c; ++i) v.values.push_back(u(gen) < 0.3 ? 0.0 : u(gen));
    }
    const double ab = csi::cir_distance(x[0], x[1]), ba = csi::cir_distance(x[1], x[0]);
    const double bc = csi::cir_distance(x[1], x[2]), ac = csi::cir_distance(x[0], x[2]);
    const bool ok = ab >= 0.0 && bc >= 0.0 && ac >= 0.0 && ab == ba && csi::cir_distance(x[0], x[0]) == 0.0 &&
                    (ab > 0.0 || x[0].values == x[1].values) && ac <= ab + bc + 1e-12 * (ab + bc);
    bad += !ok;
  }
  return {bad == 0, "1000 random triples, axiom violations: " + std::to_string(bad)};
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

gp::PipelineConfig e2e_config(const fs::path& out) {
  gp::PipelineConfig cfg;
  cfg.methods = {"siamese_geo", "pca", "sammon"};
  cfg.seed = 1;
  cfg.out = out.string();
  return cfg;
}

const fs::path& e2e_root() {
  static const fs::path root = fs::temp_directory_path() / "geochart_acceptance";
  return root;
}

Outcome end_to_end() {
  const fs::path run = e2e_root() / "run_a";
  fs::remove_all(run);
  const auto res = gp::cmd_pipeline(e2e_config(run));
  auto find = [&](const std::string& m, const std::string& split) {
    for (const auto& r : res.reports)
      if (r.method == m && r.split == split) return r;
    throw Error("missing report " + m + "/" + split);
  };
  const double limit = 0.05 * sim::default_environment().diagonal();
  bool pass = true;
  std::ostringstream os;
  for (const char* split : {"train", "test"}) {
    const auto s = find("siamese_geo", split), p = find("pca", split), m = find("sammon", split);
    pass = pass && s.ct >= 0.95 && s.tw >= 0.95 && s.mae <= limit && s.mae < p.mae && s.mae < m.mae;
    os << split << ": CT=" << fmt("%.3f", s.ct) << " TW=" << fmt("%.3f", s.tw) << " MAE=" << fmt("%.3f", s.mae)
       << " (<=" << fmt("%.3f", limit) << ", pca " << fmt("%.3f", p.mae) << ", sammon " << fmt("%.3f", m.mae)
       << "); ";
  }
  const auto tr = find("siamese_geo", "train"), te = find("siamese_geo", "test");
  const double dct = std::abs(te.ct - tr.ct), dtw = std::abs(te.tw - tr.tw);
  pass = pass && dct <= 0.03 && dtw <= 0.03;
  os << "|dCT|=" << fmt("%.4f", dct) << " |dTW|=" << fmt("%.4f", dtw) << " (<=0.03)";
  return {pass, os.str()};
}

Outcome determinism() {
  const fs::path a = e2e_root() / "run_a";
  if (!fs::exists(a / "results.csv")) end_to_end();
  const fs::path b = e2e_root() / "run_b";
  fs::remove_all(b);
  gp::cmd_pipeline(e2e_config(b));
  const bool same = slurp(a / "results.csv") == slurp(b / "results.csv");
  return {same, std::string("two seeded runs, results.csv bit-identical: ") + (same ? "yes" : "no")};
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<int> only;
  for (int i = 1; i < argc; ++i) only.push_back(std::atoi(argv[i]));

  const std::vector<Criterion> criteria{
      {1, "local-metric linearity", 120.0, local_linearity},
      {2, "geodesic linearity", 180.0, geodesic_linearity},
      {3, "shortest-path oracle", 30.0, shortest_paths},
      {4, "CT/TW oracle", 30.0, rank_measures},
      {5, "gradient correctness", 10.0, gradients},
      {6, "affine registration", 5.0, affine},
      {7, "ToA error bound", 5.0, toa_bound},
      {8, "end-to-end pipeline", 600.0, end_to_end},
      {9, "metric axioms", 10.0, metric_axioms},
      {10, "determinism", 600.0, determinism},
  };

  int failed = 0;
  double e2e_seconds = 0.0;
  for (const auto& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    // Criterion 10 shares its budget with criterion 8.
    if (c.id == 8) e2e_seconds = secs;
    const double budget_used = c.id == 10 ? secs + e2e_seconds : secs;
    const bool in_time = budget_used <= c.limit_s;
    const bool pass = o.pass && in_time;
    failed += !pass;
    std::printf("criterion %2d: %s  %s | %s | %.1f s (limit %.0f s)%s\n", c.id, pass ? "PASS" : "FAIL", c.name,
                o.detail.c_str(), secs, c.limit_s, in_time ? "" : " over time");
    std::fflush(stdout);
  }
  std::printf("acceptance: %d failed\n", failed);
  return failed == 0 ? 0 : 1;
}

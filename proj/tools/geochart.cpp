// geochart: command line front end for the channel-charting pipeline.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "geochart/pipeline.hpp"

namespace gp = geochart::pipeline;
namespace fs = std::filesystem;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool quiet = false;
};

void add_common(CLI::App* app, Common& c, bool needs_out = true) {
  app->add_option("--config", c.config, "pipeline config (JSON)")->check(CLI::ExistingFile);
  app->add_option("--seed", c.seed, "override the config seed");
  auto* o = app->add_option("--out", c.out, "output path");
  if (needs_out) o->required();
  app->add_flag("-q,--quiet", c.quiet, "suppress progress output");
}

gp::PipelineConfig resolve(const Common& c) {
  gp::PipelineConfig cfg = c.config.empty() ? gp::PipelineConfig{} : gp::load_config(c.config);
  if (c.seed) cfg.seed = *c.seed;
  if (!c.out.empty()) cfg.out = c.out;
  cfg.validate();
  return cfg;
}

gp::Logger logger(const Common& c) {
  if (c.quiet) return {};
  return [](const std::string& msg) { std::cerr << msg << std::endl; };
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"geochart: geodesic channel charting on simulated CIRs"};
  app.require_subcommand(1);

  Common sim_c;
  std::string split = "train";
  auto* sim = app.add_subcommand("simulate", "simulate a dataset");
  add_common(sim, sim_c);
  sim->add_option("--split", split, "trajectory to simulate")->check(CLI::IsMember({"train", "test"}));

  Common dist_c;
  std::string dist_data;
  int window = 0;
  auto* dist = app.add_subcommand("distances", "pairwise CIR distance matrix");
  add_common(dist, dist_c);
  dist->add_option("--data", dist_data, "dataset directory")->required();
  dist->add_option("--window", window, "aligned window length (0 = derived)");

  Common geo_c;
  std::string geo_dpw;
  std::optional<int> geo_k;
  auto* geo = app.add_subcommand("geodesic", "kNN graph geodesic matrix");
  add_common(geo, geo_c);
  geo->add_option("--dpw", geo_dpw, "pairwise matrix blob")->required();
  geo->add_option("-k", geo_k, "neighbours per node (default from config)");

  Common train_c;
  std::string train_data, train_dgeo;
  auto* train = app.add_subcommand("train", "train the Siamese encoder");
  add_common(train, train_c);
  train->add_option("--data", train_data, "dataset directory")->required();
  train->add_option("--dgeo", train_dgeo, "geodesic matrix blob")->required();

  Common embed_c;
  std::string embed_enc, embed_data;
  auto* embed = app.add_subcommand("embed", "embed a dataset with a trained encoder");
  add_common(embed, embed_c);
  embed->add_option("--encoder", embed_enc, "encoder directory")->required();
  embed->add_option("--data", embed_data, "dataset directory")->required();

  Common ev_c;
  std::string ev_chart, ev_data, ev_dpw, ev_fit_chart, ev_fit_data;
  auto* ev = app.add_subcommand("evaluate", "CT/TW, MAE and CE90 of a chart");
  add_common(ev, ev_c, false);
  ev->add_option("--chart", ev_chart, "chart directory")->required();
  ev->add_option("--data", ev_data, "dataset directory")->required();
  ev->add_option("--dpw", ev_dpw, "pairwise matrix of the same dataset")->required();
  ev->add_option("--fit-chart", ev_fit_chart, "chart used to fit the affine map (default: --chart)");
  ev->add_option("--fit-data", ev_fit_data, "dataset used to fit the affine map");

  Common pipe_c;
  auto* pipe = app.add_subcommand("pipeline", "full simulate/train/evaluate run");
  add_common(pipe, pipe_c, false);

  Common study_c;
  std::string study_data;
  std::optional<std::int64_t> study_m;
  auto* study = app.add_subcommand("study", "distance-metric correlation study");
  add_common(study, study_c);
  study->add_option("--data", study_data, "dataset directory (simulated when omitted)");
  study->add_option("-m,--pairs", study_m, "number of sampled pairs");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) {
      const auto cfg = resolve(sim_c);
      const auto s = split == "train" ? gp::Split::Train : gp::Split::Test;
      std::cout << "dataset " << gp::cmd_simulate(cfg, sim_c.out, s) << " written to " << sim_c.out << "\n";
    } else if (dist->parsed()) {
      const auto cfg = resolve(dist_c);
      gp::cmd_distances(dist_data, dist_c.out, window > 0 ? window : cfg.window_length, cfg.cir_normalization);
    } else if (geo->parsed()) {
      const auto cfg = resolve(geo_c);
      gp::cmd_geodesic(geo_dpw, geo_k.value_or(cfg.graph_k), geo_c.out);
    } else if (train->parsed()) {
      auto cfg = resolve(train_c);
      cfg.train.seed = gp::encoder_seed(cfg);
      gp::cmd_train(train_data, train_dgeo, cfg.train, cfg.window_length, cfg.cir_normalization, train_c.out);
    } else if (embed->parsed()) {
      gp::cmd_embed(embed_enc, embed_data, embed_c.out);
    } else if (ev->parsed()) {
      const auto r = gp::cmd_evaluate(ev_chart, ev_data, ev_dpw, ev_fit_chart, ev_fit_data);
      std::cout << geochart::io::results_csv_header() << "\n" << geochart::io::results_csv_row(r) << "\n";
    } else if (pipe->parsed()) {
      const auto cfg = resolve(pipe_c);
      const auto res = gp::cmd_pipeline(cfg, logger(pipe_c));
      std::cout << "results written to " << (res.run_dir / "results.csv").string() << "\n";
    } else if (study->parsed()) {
      auto cfg = resolve(study_c);
      if (study_m) cfg.study_pairs = *study_m;
      const auto r = gp::cmd_study(cfg, study_data, study_c.out, logger(study_c));
      std::cout << "pairs " << r.pairs.size() << "  r_cir " << r.r_cir << "  r_geo " << r.r_geo << "\n";
      for (const auto& b : r.bins) {
        std::cout << "  [" << b.lo << ", " << b.hi << ") n=" << b.count << " r_cir=" << b.r_cir
                  << " r_geo=" << b.r_geo << "\n";
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

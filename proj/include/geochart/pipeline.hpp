#pragma once

// End-to-end orchestration behind the command line tool: simulate train and
// test trajectories, build distances and geodesics, fit every requested chart
// method on the training split and report on both splits.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "geochart/io.hpp"

namespace geochart::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

inline constexpr const char* kVersion = "0.1.0";

enum class Split { Train, Test };
std::string to_string(Split s);

struct PipelineConfig {
  sim::EnvironmentSpec environment = sim::default_environment();
  sim::RadioConfig radio;
  sim::TrajectorySpec train_trajectory{sim::TrajectoryKind::RandomWaypoint, 2000};
  sim::TrajectorySpec test_trajectory{sim::TrajectoryKind::RandomWaypoint, 500};
  int graph_k = 15;
  int window_length = 0;  // 0: derived from the environment
  csi::RowNorm cir_normalization = csi::RowNorm::L1;
  chart::TrainConfig train;
  chart::MdsConfig mds;
  chart::SammonConfig sammon;
  std::vector<std::string> methods{"siamese_geo", "isomap_mds", "pca", "sammon"};
  int out_of_sample_k = 10;  // neighbours used to place test points for MDS / Sammon
  std::string out = "run";
  std::uint64_t seed = 1;
  // distance study
  std::int64_t study_pairs = 20000;
  std::vector<double> study_bins{0.0, 1.0, 2.0, 5.0, 10.0, 20.0, 40.0};

  void validate() const;
};

PipelineConfig config_from_json(const json& j);
json to_json(const PipelineConfig& cfg);
PipelineConfig load_config(const fs::path& path);

/// Independent seed for a named sub-stage.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag);

/// Seed the pipeline hands to the encoder (config seed, not train.seed).
std::uint64_t encoder_seed(const PipelineConfig& cfg);

/// Window length actually used (explicit or derived).
int resolved_window(const PipelineConfig& cfg);

bool is_known_method(const std::string& m);

sim::Dataset simulate_split(const PipelineConfig& cfg, Split split);
/// Writes the dataset plus summary.txt into `out`; returns its content hash.
std::string cmd_simulate(const PipelineConfig& cfg, const fs::path& out, Split split = Split::Train);

std::vector<csi::AlignedTensor> aligned_tensors(const sim::Dataset& ds, int window_length,
                                                csi::RowNorm norm = csi::RowNorm::None);
std::vector<Vec2> positions(const sim::Dataset& ds);

/// Cross CIR distances [queries x references], row-major.
std::vector<double> cross_distances(const std::vector<csi::AlignedTensor>& queries,
                                    const std::vector<csi::AlignedTensor>& references);

/// kNN graph + geodesics; a disconnected graph is reported together with the
/// smallest k that would connect it.
graph::DistanceMatrix geodesics_checked(const graph::DistanceMatrix& dpw, int k);

void cmd_distances(const fs::path& dataset_dir, const fs::path& out_blob, int window_length, csi::RowNorm norm);
void cmd_geodesic(const fs::path& dpw_blob, int k, const fs::path& out_blob);
void cmd_train(const fs::path& dataset_dir, const fs::path& dgeo_blob, const chart::TrainConfig& train_cfg,
               int window_length, csi::RowNorm norm, const fs::path& out_dir);
void cmd_embed(const fs::path& encoder_dir, const fs::path& dataset_dir, const fs::path& out_dir);
/// Fits the affine map on `fit_chart_dir`/`fit_dataset_dir` (defaults to the
/// evaluated pair) and writes report.json next to the chart.
eval::EvalReport cmd_evaluate(const fs::path& chart_dir, const fs::path& dataset_dir, const fs::path& dpw_blob,
                              const fs::path& fit_chart_dir = {}, const fs::path& fit_dataset_dir = {});

struct MethodCharts {
  chart::Embedding train;
  chart::Embedding test;
};

struct PipelineResult {
  fs::path run_dir;
  std::vector<eval::EvalReport> reports;  // method-major, train then test
};

using Logger = std::function<void(const std::string&)>;

PipelineResult cmd_pipeline(const PipelineConfig& cfg, const Logger& log = {});

struct StudyBin {
  double lo = 0.0;
  double hi = 0.0;
  std::int64_t count = 0;
  double r_cir = 0.0;
  double r_geo = 0.0;
};

struct StudyPair {
  int i = 0;
  int j = 0;
  double d_euc = 0.0;
  double d_cir = 0.0;
  double d_geo = 0.0;
};

struct StudyResult {
  std::vector<StudyPair> pairs;
  std::vector<StudyBin> bins;
  double r_cir = 0.0;
  double r_geo = 0.0;
  bool clamped = false;
};

/// Samples `m` distinct pairs (all pairs when m >= N(N-1)/2, flagged as
/// clamped) and correlates CIR and geodesic distances with ground truth.
StudyResult distance_study(const std::vector<Vec2>& positions, const graph::DistanceMatrix& dpw,
                           const graph::DistanceMatrix& dgeo, std::int64_t m, std::uint64_t seed,
                           const std::vector<double>& bin_edges);

/// Runs the study on `dataset_dir` (simulated from the config when absent)
/// and writes study.csv + study.json into `out`.
StudyResult cmd_study(const PipelineConfig& cfg, const fs::path& dataset_dir, const fs::path& out,
                      const Logger& log = {});

}  // namespace geochart::pipeline

#pragma once

// On-disk formats: little-endian binary blobs with JSON sidecars.
//
//   dataset dir : meta.json, cirs.f32 [N, N_b, T], toa.f64 [N, N_b],
//                 pos.f64 [N, 2], ts.f64 [N]
//   matrices    : dpw.f64 / dgeo.f64 [N, N] + <name>.json
//   encoder     : encoder.json + weights.f64
//   embedding   : chart.f64 [N, 2] + chart.json

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "geochart/baselines.hpp"
#include "geochart/encoder.hpp"
#include "geochart/eval.hpp"
#include "geochart/graph.hpp"
#include "geochart/sim.hpp"

namespace geochart::io {

namespace fs = std::filesystem;
using nlohmann::json;

void write_f64(const fs::path& path, std::span<const double> values);
void write_f32(const fs::path& path, std::span<const float> values);
std::vector<double> read_f64(const fs::path& path);
std::vector<float> read_f32(const fs::path& path);

void write_json(const fs::path& path, const json& j);
json read_json(const fs::path& path);
void write_text(const fs::path& path, const std::string& text);

/// 64-bit FNV-1a over the given byte ranges, as 16 hex digits.
std::string fnv1a_hex(std::span<const std::uint8_t> bytes);

json to_json(const sim::EnvironmentSpec& env);
sim::EnvironmentSpec environment_from_json(const json& j);
json to_json(const sim::RadioConfig& radio);
sim::RadioConfig radio_from_json(const json& j);
json to_json(const sim::TrajectorySpec& t);
sim::TrajectorySpec trajectory_from_json(const json& j);
json to_json(const chart::TrainConfig& cfg);
chart::TrainConfig train_config_from_json(const json& j);
json to_json(const chart::MdsConfig& cfg);
chart::MdsConfig mds_config_from_json(const json& j);
json to_json(const chart::SammonConfig& cfg);
chart::SammonConfig sammon_config_from_json(const json& j);
json to_json(const eval::EvalReport& r);

/// Hash of a dataset directory's binary content (cirs.f32 + toa.f64).
std::string dataset_hash(const fs::path& dir);

void write_dataset(const fs::path& dir, const sim::Dataset& ds);
sim::Dataset read_dataset(const fs::path& dir);

void write_matrix(const fs::path& blob, const graph::DistanceMatrix& d, int k, const std::string& source_hash);
graph::DistanceMatrix read_matrix(const fs::path& blob);

/// The preprocessing used at training time is stored with the weights.
void write_encoder(const fs::path& dir, const chart::EncoderParams& p, int window_length, csi::RowNorm norm);
chart::EncoderParams read_encoder(const fs::path& dir, int* window_length = nullptr, csi::RowNorm* norm = nullptr);

void write_embedding(const fs::path& dir, const chart::Embedding& e);
chart::Embedding read_embedding(const fs::path& dir);

/// CSV header/row matching the results table layout.
std::string results_csv_header();
std::string results_csv_row(const eval::EvalReport& r);

}  // namespace geochart::io

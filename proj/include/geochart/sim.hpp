#pragma once

// Radio environment simulator: 2-D image-source multipath, band-limited CIR
// synthesis and labeled snapshot datasets on simulated trajectories.

#include <complex>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "geochart/common.hpp"

namespace geochart::sim {

struct Rect {
  Vec2 min;
  Vec2 max;

  bool contains(Vec2 p) const {
    return p.x >= min.x && p.x <= max.x && p.y >= min.y && p.y <= max.y;
  }
  double width() const { return max.x - min.x; }
  double height() const { return max.y - min.y; }
  double diagonal() const { return std::hypot(width(), height()); }
};

struct Segment {
  Vec2 a;
  Vec2 b;
  bool reflective = true;

  double length() const { return distance(a, b); }
};

struct BaseStation {
  int id = 0;
  Vec2 position;
};

/// Reflective walls produce image sources; blockers (and non-reflective walls)
/// remove every path leg that crosses them.
struct EnvironmentSpec {
  Rect bounds;
  std::vector<Segment> walls;
  std::vector<BaseStation> base_stations;
  std::vector<Segment> blockers;

  void validate() const;
  double diagonal() const { return bounds.diagonal(); }
  std::size_t station_index(int bs_id) const;
  /// Segments that occlude paths: blockers plus non-reflective walls.
  std::vector<Segment> occluders() const;
};

enum class Mode { ToF, TDoA };

std::string to_string(Mode mode);
Mode mode_from_string(const std::string& s);

struct RadioConfig {
  double bandwidth = 500e6;         // Hz
  double sample_rate = 1e9;         // Hz
  int cir_length = 100;             // samples
  int max_reflection_order = 2;
  double noise_std = 0.0;           // linear amplitude
  Mode mode = Mode::ToF;
  double toa_noise_std = 1e-9;      // s
  double reflection_loss = 0.7;     // amplitude factor per bounce
  int precursor = 4;                // samples recorded ahead of the first path
  double c = kSpeedOfLight;

  double sample_period() const { return 1.0 / sample_rate; }
  double window_duration() const { return cir_length / sample_rate; }
  void validate(const EnvironmentSpec& env) const;
};

struct ImageSource {
  Vec2 position;
  int order = 0;
  std::vector<int> walls;  // reflecting wall indices, in bounce order from the station
};

struct Mpc {
  double delay = 0.0;  // s
  std::complex<double> gain;
  int order = 0;
};

/// Per-station path lists, each sorted ascending by delay.
using MpcList = std::vector<std::vector<Mpc>>;

struct CirResult {
  std::vector<double> magnitude;
  double first_path_toa = 0.0;
  bool has_path = false;
};

struct CirSnapshot {
  std::int64_t index = 0;
  Vec2 position;
  int num_stations = 0;
  int cir_length = 0;
  std::vector<double> cirs;          // row-major [num_stations, cir_length]
  std::vector<double> measured_toa;  // per station, s
  double timestamp = 0.0;

  double cir(int station, int t) const { return cirs[static_cast<std::size_t>(station) * cir_length + t]; }
};

struct Dataset {
  EnvironmentSpec environment;
  RadioConfig radio;
  std::vector<CirSnapshot> snapshots;
  std::uint64_t rng_seed = 0;

  int num_stations() const { return static_cast<int>(environment.base_stations.size()); }
  void validate() const;
};

enum class TrajectoryKind { Grid, RandomWaypoint };

std::string to_string(TrajectoryKind kind);
TrajectoryKind trajectory_kind_from_string(const std::string& s);

struct TrajectorySpec {
  TrajectoryKind kind = TrajectoryKind::RandomWaypoint;
  int n = 0;               // random_waypoint: points; grid: cap (0 = all)
  double speed = 1.0;      // m/s
  double dt = 0.5;         // s
  double spacing = 1.0;    // grid raster spacing, m
  double clearance = 0.1;  // minimum distance to blockers, m
  double jitter = 0.0;     // grid: uniform offset per point, fraction of the spacing
};

struct TrajectoryPoint {
  Vec2 position;
  double timestamp = 0.0;
};

std::vector<ImageSource> image_sources(const EnvironmentSpec& env, int bs_id, int max_order);

/// Visible paths from every station to `pos`. Phases come from `rng`.
MpcList multipath(const EnvironmentSpec& env, const RadioConfig& radio, Vec2 pos, Rng& rng);

/// Band-limited CIR magnitude sampled at t = window_start + s / sample_rate.
CirResult simulate_cir(const std::vector<Mpc>& mpcs, const RadioConfig& radio, Rng& rng,
                       double window_start = 0.0);

std::vector<TrajectoryPoint> generate_trajectory(const EnvironmentSpec& env, const TrajectorySpec& spec,
                                                 Rng& rng);

Dataset generate_dataset(const EnvironmentSpec& env, const RadioConfig& radio,
                         const std::vector<TrajectoryPoint>& trajectory, std::uint64_t rng_seed);

/// Ray-parameter geometry of a first-path displacement between two positions
/// seen from two stations: eps_k is the component of the displacement
/// orthogonal to the ToF change, in seconds.
struct ToaErrorTerms {
  double d_euc = 0.0;  // m
  double eps1 = 0.0;   // s
  double eps2 = 0.0;   // s
};

ToaErrorTerms toa_error_terms(Vec2 x_i, Vec2 x_j, Vec2 b1, Vec2 b2, double c = kSpeedOfLight);

/// Segment intersection helper shared with tests: true when the open segment
/// p->q properly crosses s (touching endpoints counts as crossing).
bool segments_cross(Vec2 p, Vec2 q, const Segment& s);

EnvironmentSpec default_environment();
EnvironmentSpec open_environment(double width, double height, int num_stations);

}  // namespace geochart::sim

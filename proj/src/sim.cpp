#include "geochart/sim.hpp"

#include <algorithm>
#include <limits>
#include <sstream>

namespace geochart::sim {

namespace {

Vec2 mirror(Vec2 p, const Segment& wall) {
  const Vec2 d = wall.b - wall.a;
  const double t = dot(p - wall.a, d) / dot(d, d);
  const Vec2 foot = wall.a + t * d;
  return 2.0 * foot - p;
}

// Intersection of segment p->q with the wall, as a point strictly inside p->q
// and within the wall extent.
std::optional<Vec2> reflection_point(Vec2 p, Vec2 q, const Segment& wall) {
  const Vec2 r = q - p;
  const Vec2 s = wall.b - wall.a;
  const double denom = cross(r, s);
  if (std::abs(denom) < 1e-15) return std::nullopt;
  const Vec2 ap = wall.a - p;
  const double u = cross(ap, s) / denom;  // along p->q
  const double v = cross(ap, r) / denom;  // along the wall
  constexpr double eps = 1e-12;
  if (u <= eps || u >= 1.0 - eps || v < 0.0 || v > 1.0) return std::nullopt;
  return p + u * r;
}

double point_segment_distance(Vec2 p, const Segment& s) {
  const Vec2 d = s.b - s.a;
  const double len2 = dot(d, d);
  double t = len2 > 0.0 ? dot(p - s.a, d) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return distance(p, s.a + t * d);
}

double segment_distance(Vec2 p, Vec2 q, const Segment& s) {
  if (segments_cross(p, q, s)) return 0.0;
  const Segment pq{p, q, false};
  return std::min({point_segment_distance(p, s), point_segment_distance(q, s), point_segment_distance(s.a, pq),
                   point_segment_distance(s.b, pq)});
}

bool leg_blocked(Vec2 p, Vec2 q, const std::vector<Segment>& occluders) {
  for (const auto& s : occluders) {
    if (segments_cross(p, q, s)) return true;
  }
  return false;
}

bool position_clear(Vec2 p, const EnvironmentSpec& env, const std::vector<Segment>& occluders, double clearance) {
  if (!env.bounds.contains(p)) return false;
  for (const auto& s : occluders) {
    if (point_segment_distance(p, s) < clearance) return false;
  }
  return true;
}

}  // namespace

bool segments_cross(Vec2 p, Vec2 q, const Segment& s) {
  const auto orient = [](Vec2 a, Vec2 b, Vec2 c) { return cross(b - a, c - a); };
  const double d1 = orient(s.a, s.b, p);
  const double d2 = orient(s.a, s.b, q);
  const double d3 = orient(p, q, s.a);
  const double d4 = orient(p, q, s.b);
  if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0))) return true;
  const auto on_segment = [](Vec2 a, Vec2 b, Vec2 c) {
    return std::min(a.x, b.x) <= c.x && c.x <= std::max(a.x, b.x) && std::min(a.y, b.y) <= c.y &&
           c.y <= std::max(a.y, b.y);
  };
  if (d1 == 0 && on_segment(s.a, s.b, p)) return true;
  if (d2 == 0 && on_segment(s.a, s.b, q)) return true;
  if (d3 == 0 && on_segment(p, q, s.a)) return true;
  if (d4 == 0 && on_segment(p, q, s.b)) return true;
  return false;
}

std::string to_string(Mode mode) { return mode == Mode::ToF ? "ToF" : "TDoA"; }

Mode mode_from_string(const std::string& s) {
  if (s == "ToF" || s == "tof") return Mode::ToF;
  if (s == "TDoA" || s == "tdoa") return Mode::TDoA;
  throw Error("unknown radio mode '" + s + "' (expected ToF or TDoA)");
}

std::string to_string(TrajectoryKind kind) { return kind == TrajectoryKind::Grid ? "grid" : "random_waypoint"; }

TrajectoryKind trajectory_kind_from_string(const std::string& s) {
  if (s == "grid") return TrajectoryKind::Grid;
  if (s == "random_waypoint") return TrajectoryKind::RandomWaypoint;
  throw Error("unknown trajectory kind '" + s + "' (expected grid or random_waypoint)");
}

void EnvironmentSpec::validate() const {
  if (!(bounds.max.x > bounds.min.x && bounds.max.y > bounds.min.y)) throw Error("environment bounds are empty");
  if (base_stations.size() < 2) throw Error("environment needs at least 2 base stations");
  for (std::size_t i = 0; i < base_stations.size(); ++i) {
    if (!bounds.contains(base_stations[i].position)) {
      throw Error("base station " + std::to_string(base_stations[i].id) + " lies outside the bounds");
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (base_stations[i].id == base_stations[j].id) {
        throw Error("duplicate base station id " + std::to_string(base_stations[i].id));
      }
    }
  }
  const auto check_segments = [&](const std::vector<Segment>& segs, const char* what) {
    for (std::size_t i = 0; i < segs.size(); ++i) {
      if (!(segs[i].length() > 0.0)) throw Error(std::string(what) + " " + std::to_string(i) + " has zero length");
      if (!bounds.contains(segs[i].a) || !bounds.contains(segs[i].b)) {
        throw Error(std::string(what) + " " + std::to_string(i) + " lies outside the bounds");
      }
    }
  };
  check_segments(walls, "wall");
  check_segments(blockers, "blocker");
}

std::size_t EnvironmentSpec::station_index(int bs_id) const {
  for (std::size_t i = 0; i < base_stations.size(); ++i) {
    if (base_stations[i].id == bs_id) return i;
  }
  throw Error("unknown base station id " + std::to_string(bs_id));
}

std::vector<Segment> EnvironmentSpec::occluders() const {
  std::vector<Segment> out = blockers;
  for (const auto& w : walls) {
    if (!w.reflective) out.push_back(w);
  }
  return out;
}

void RadioConfig::validate(const EnvironmentSpec& env) const {
  if (!(bandwidth > 0.0)) throw Error("bandwidth must be positive");
  if (!(sample_rate >= 2.0 * bandwidth)) throw Error("sample_rate must be at least twice the bandwidth");
  if (cir_length <= 0) throw Error("cir_length must be positive");
  if (max_reflection_order < 0) throw Error("max_reflection_order must be >= 0");
  if (noise_std < 0.0 || toa_noise_std < 0.0) throw Error("noise levels must be non-negative");
  if (precursor < 0 || precursor >= cir_length) throw Error("precursor must lie in [0, cir_length)");
  if (!(window_duration() * c > env.diagonal())) {
    std::ostringstream os;
    os << "CIR window covers " << window_duration() * c << " m, less than the environment diagonal "
       << env.diagonal() << " m";
    throw Error(os.str());
  }
}

std::vector<ImageSource> image_sources(const EnvironmentSpec& env, int bs_id, int max_order) {
  if (max_order < 0) throw Error("max_order must be >= 0");
  const auto& bs = env.base_stations[env.station_index(bs_id)];
  std::vector<ImageSource> out{ImageSource{bs.position, 0, {}}};
  std::size_t level_begin = 0;
  for (int order = 1; order <= max_order; ++order) {
    const std::size_t level_end = out.size();
    for (std::size_t s = level_begin; s < level_end; ++s) {
      for (int w = 0; w < static_cast<int>(env.walls.size()); ++w) {
        if (!env.walls[w].reflective) continue;
        // Mirroring twice across the same wall returns the parent source.
        if (!out[s].walls.empty() && out[s].walls.back() == w) continue;
        ImageSource img;
        img.position = mirror(out[s].position, env.walls[w]);
        img.order = order;
        img.walls = out[s].walls;
        img.walls.push_back(w);
        out.push_back(std::move(img));
      }
    }
    level_begin = level_end;
  }
  return out;
}

MpcList multipath(const EnvironmentSpec& env, const RadioConfig& radio, Vec2 pos, Rng& rng) {
  if (!env.bounds.contains(pos)) {
    std::ostringstream os;
    os << "position (" << pos.x << ", " << pos.y << ") lies outside the environment bounds";
    throw Error(os.str());
  }
  const auto occluders = env.occluders();
  const double min_distance = radio.c / radio.sample_rate;
  std::uniform_real_distribution<double> phase(0.0, 2.0 * kPi);

  MpcList out(env.base_stations.size());
  for (std::size_t k = 0; k < env.base_stations.size(); ++k) {
    const Vec2 bs = env.base_stations[k].position;
    std::vector<Mpc> paths;
    for (const auto& img : image_sources(env, env.base_stations[k].id, radio.max_reflection_order)) {
      // Unfold the path from the receiver back to the station.
      std::vector<Vec2> chain{bs};
      for (int w : img.walls) chain.push_back(mirror(chain.back(), env.walls[w]));
      Vec2 target = pos;
      bool valid = true;
      for (int m = img.order; m >= 1 && valid; --m) {
        const auto hit = reflection_point(chain[m], target, env.walls[img.walls[m - 1]]);
        if (!hit) {
          valid = false;
          break;
        }
        if (leg_blocked(*hit, target, occluders)) valid = false;
        target = *hit;
      }
      if (!valid || leg_blocked(bs, target, occluders)) continue;

      const double length = distance(img.position, pos);
      Mpc mpc;
      mpc.delay = length / radio.c;
      mpc.order = img.order;
      const double amplitude = std::pow(radio.reflection_loss, img.order) / std::max(length, min_distance);
      mpc.gain = std::polar(amplitude, phase(rng));
      paths.push_back(mpc);
    }
    std::stable_sort(paths.begin(), paths.end(), [](const Mpc& a, const Mpc& b) { return a.delay < b.delay; });
    // Coincident delays are one physical arrival.
    std::vector<Mpc> merged;
    for (const auto& p : paths) {
      if (!merged.empty() && merged.back().delay == p.delay) {
        merged.back().gain += p.gain;
      } else {
        merged.push_back(p);
      }
    }
    out[k] = std::move(merged);
  }
  return out;
}

namespace {

// Magnitudes of sum_n a_n sinc(B (t - T_n - offset)) at t = start + s / fs, plus
// receiver noise. Paths outside the window still leak their sidelobes in.
std::vector<double> synthesize(const std::vector<Mpc>& mpcs, const RadioConfig& radio, Rng& rng, double window_start,
                               double clock_offset) {
  const int length = radio.cir_length;
  const double period = radio.sample_period();
  std::vector<std::complex<double>> h(length);
  for (int s = 0; s < length; ++s) {
    const double t = window_start + s * period;
    std::complex<double> acc{0.0, 0.0};
    for (const auto& m : mpcs) {
      const double x = radio.bandwidth * (t - m.delay - clock_offset);
      const double sinc = x == 0.0 ? 1.0 : std::sin(kPi * x) / (kPi * x);
      acc += m.gain * sinc;
    }
    h[s] = acc;
  }
  if (radio.noise_std > 0.0) {
    std::normal_distribution<double> noise(0.0, radio.noise_std / std::sqrt(2.0));
    for (auto& v : h) {
      const double re = noise(rng);
      const double im = noise(rng);
      v += std::complex<double>(re, im);
    }
  }
  std::vector<double> out(length);
  for (int s = 0; s < length; ++s) out[s] = std::abs(h[s]);
  return out;
}

}  // namespace

CirResult simulate_cir(const std::vector<Mpc>& mpcs, const RadioConfig& radio, Rng& rng, double window_start) {
  const double window_end = window_start + (radio.cir_length - 1) * radio.sample_period();
  for (std::size_t n = 0; n < mpcs.size(); ++n) {
    if (mpcs[n].delay < window_start || mpcs[n].delay > window_end) {
      std::ostringstream os;
      os << "MPC " << n << " with delay " << mpcs[n].delay << " s falls outside the CIR window [" << window_start
         << ", " << window_end << "] s";
      throw Error(os.str());
    }
  }

  CirResult out;
  out.magnitude = synthesize(mpcs, radio, rng, window_start, 0.0);
  if (mpcs.empty()) return out;

  out.has_path = true;
  double first = mpcs.front().delay;
  for (const auto& m : mpcs) first = std::min(first, m.delay);
  if (radio.toa_noise_std > 0.0) {
    std::normal_distribution<double> toa_noise(0.0, radio.toa_noise_std);
    first += toa_noise(rng);
  }
  out.first_path_toa = first;
  return out;
}

std::vector<TrajectoryPoint> generate_trajectory(const EnvironmentSpec& env, const TrajectorySpec& spec, Rng& rng) {
  const auto occluders = env.occluders();
  std::vector<TrajectoryPoint> out;

  if (spec.kind == TrajectoryKind::Grid) {
    if (!(spec.spacing > 0.0)) throw Error("grid spacing must be positive");
    if (spec.jitter < 0.0 || spec.jitter > 1.0) throw Error("grid jitter must lie in [0, 1]");
    const int nx = static_cast<int>(std::floor(env.bounds.width() / spec.spacing + 1e-9)) + 1;
    const int ny = static_cast<int>(std::floor(env.bounds.height() / spec.spacing + 1e-9)) + 1;
    for (int iy = 0; iy < ny; ++iy) {
      for (int ix = 0; ix < nx; ++ix) {
        Vec2 p{env.bounds.min.x + ix * spec.spacing, env.bounds.min.y + iy * spec.spacing};
        if (spec.jitter > 0.0) {
          // Stratified sample: one uniform draw inside the raster cell.
          std::uniform_real_distribution<double> u(-0.5 * spec.jitter * spec.spacing, 0.5 * spec.jitter * spec.spacing);
          for (int a = 0; a < 16; ++a) {
            const Vec2 q{std::clamp(p.x + u(rng), env.bounds.min.x, env.bounds.max.x),
                         std::clamp(p.y + u(rng), env.bounds.min.y, env.bounds.max.y)};
            if (position_clear(q, env, occluders, spec.clearance)) {
              p = q;
              break;
            }
          }
        }
        if (!position_clear(p, env, occluders, spec.clearance)) continue;
        out.push_back({p, static_cast<double>(out.size()) * spec.dt});
      }
    }
    if (spec.n < 0) throw Error("trajectory point count must be >= 0");
    if (spec.n > 0) {
      if (static_cast<std::size_t>(spec.n) > out.size()) {
        throw Error("grid holds " + std::to_string(out.size()) + " reachable points, " + std::to_string(spec.n) +
                    " requested");
      }
      out.resize(spec.n);
    }
    if (out.empty()) throw Error("grid trajectory is empty");
    return out;
  }

  if (spec.n < 1) throw Error("random_waypoint trajectory needs n >= 1");
  if (!(spec.speed > 0.0) || !(spec.dt > 0.0)) throw Error("speed and dt must be positive");
  constexpr int kMaxAttempts = 10000;
  std::uniform_real_distribution<double> ux(env.bounds.min.x, env.bounds.max.x);
  std::uniform_real_distribution<double> uy(env.bounds.min.y, env.bounds.max.y);

  Vec2 current{};
  bool found = false;
  for (int a = 0; a < kMaxAttempts && !found; ++a) {
    current = {ux(rng), uy(rng)};
    found = position_clear(current, env, occluders, spec.clearance);
  }
  if (!found) throw Error("no free start position found for random_waypoint trajectory");

  const auto next_waypoint = [&](Vec2 from) {
    for (int a = 0; a < kMaxAttempts; ++a) {
      const Vec2 w{ux(rng), uy(rng)};
      if (!position_clear(w, env, occluders, spec.clearance)) continue;
      bool clear = true;
      for (const auto& s : occluders) {
        if (segment_distance(from, w, s) < spec.clearance) {
          clear = false;
          break;
        }
      }
      if (clear && distance(from, w) > 0.0) return w;
    }
    throw Error("no reachable waypoint found after " + std::to_string(kMaxAttempts) + " attempts");
  };

  Vec2 waypoint = next_waypoint(current);
  const double step = spec.speed * spec.dt;
  out.push_back({current, 0.0});
  while (static_cast<int>(out.size()) < spec.n) {
    double remaining = step;
    while (remaining > 0.0) {
      const double to_go = distance(current, waypoint);
      if (to_go > remaining) {
        current = current + (remaining / to_go) * (waypoint - current);
        remaining = 0.0;
      } else {
        current = waypoint;
        remaining -= to_go;
        waypoint = next_waypoint(current);
      }
    }
    out.push_back({current, static_cast<double>(out.size()) * spec.dt});
  }
  return out;
}

Dataset generate_dataset(const EnvironmentSpec& env, const RadioConfig& radio,
                         const std::vector<TrajectoryPoint>& trajectory, std::uint64_t rng_seed) {
  env.validate();
  radio.validate(env);
  if (trajectory.empty()) throw Error("trajectory is empty");

  Dataset ds;
  ds.environment = env;
  ds.radio = radio;
  ds.rng_seed = rng_seed;
  const int nb = static_cast<int>(env.base_stations.size());
  const int length = radio.cir_length;
  const double period = radio.sample_period();
  ds.snapshots.reserve(trajectory.size());

  for (std::size_t i = 0; i < trajectory.size(); ++i) {
    Rng rng = make_stream(rng_seed, i);
    CirSnapshot snap;
    snap.index = static_cast<std::int64_t>(i);
    snap.position = trajectory[i].position;
    snap.timestamp = trajectory[i].timestamp;
    snap.num_stations = nb;
    snap.cir_length = length;
    snap.cirs.resize(static_cast<std::size_t>(nb) * length);
    snap.measured_toa.resize(nb);

    try {
      const MpcList mpcs = multipath(env, radio, snap.position, rng);
      // Each station's receiver clock is off by a timing error; the first arrival
      // is detected at true delay + error, and the recorded pulses carry it too.
      std::vector<double> true_first(nb, 0.0);
      std::vector<double> clock_error(nb, 0.0);
      std::normal_distribution<double> toa_noise(0.0, radio.toa_noise_std > 0.0 ? radio.toa_noise_std : 1.0);
      int ref = -1;
      for (int k = 0; k < nb; ++k) {
        if (mpcs[k].empty()) continue;
        true_first[k] = mpcs[k].front().delay;
        if (radio.toa_noise_std > 0.0) clock_error[k] = toa_noise(rng);
        if (ref < 0 || true_first[k] < true_first[ref] ||
            (true_first[k] == true_first[ref] && env.base_stations[k].id < env.base_stations[ref].id)) {
          ref = k;
        }
      }
      if (ref < 0) throw Error("no propagation path to any station");

      const double ref_arrival = true_first[ref] + clock_error[ref];
      // Column 0 of the aligned tensor maps to sample index `base - precursor`
      // on the receiver clock: absolute time for ToF, reference-relative for TDoA.
      const long base = radio.mode == Mode::ToF ? 0 : nearest_sample(ref_arrival, radio.sample_rate);
      for (int k = 0; k < nb; ++k) {
        const auto row = snap.cirs.begin() + static_cast<std::ptrdiff_t>(k) * length;
        if (mpcs[k].empty()) {
          // Shadowed station: noise only, no reported arrival.
          const auto mag = synthesize({}, radio, rng, 0.0, 0.0);
          std::copy(mag.begin(), mag.end(), row);
          snap.measured_toa[k] = 0.0;
          continue;
        }
        const double arrival = true_first[k] + clock_error[k];
        if (radio.mode == Mode::ToF) {
          snap.measured_toa[k] = std::max(0.0, arrival);  // a receiver never reports negative ToF
        } else {
          snap.measured_toa[k] = k == ref ? 0.0 : std::abs(arrival - ref_arrival);
        }
        const long start = base + nearest_sample(snap.measured_toa[k], radio.sample_rate) - radio.precursor;
        const auto mag = synthesize(mpcs[k], radio, rng, static_cast<double>(start) * period, clock_error[k]);
        std::copy(mag.begin(), mag.end(), row);
      }
    } catch (const Error& e) {
      throw Error("snapshot " + std::to_string(i) + ": " + e.what());
    }
    ds.snapshots.push_back(std::move(snap));
  }
  return ds;
}

void Dataset::validate() const {
  for (std::size_t i = 0; i < snapshots.size(); ++i) {
    const auto& s = snapshots[i];
    if (s.num_stations != snapshots.front().num_stations || s.cir_length != snapshots.front().cir_length) {
      throw Error("snapshot " + std::to_string(i) + " has a different shape");
    }
    if (s.cirs.size() != static_cast<std::size_t>(s.num_stations) * s.cir_length ||
        s.measured_toa.size() != static_cast<std::size_t>(s.num_stations)) {
      throw Error("snapshot " + std::to_string(i) + " has inconsistent buffer sizes");
    }
    if (i > 0 && !(s.timestamp > snapshots[i - 1].timestamp)) {
      throw Error("timestamps are not strictly increasing at snapshot " + std::to_string(i));
    }
  }
}

ToaErrorTerms toa_error_terms(Vec2 x_i, Vec2 x_j, Vec2 b1, Vec2 b2, double c) {
  ToaErrorTerms out;
  out.d_euc = distance(x_i, x_j);
  const double d2 = out.d_euc * out.d_euc;
  const auto eps = [&](Vec2 b) {
    const double range_change = std::abs(distance(x_i, b) - distance(x_j, b));
    return std::sqrt(std::max(0.0, d2 - range_change * range_change)) / c;
  };
  out.eps1 = eps(b1);
  out.eps2 = eps(b2);
  return out;
}

EnvironmentSpec default_environment() {
  EnvironmentSpec env;
  env.bounds = {{0.0, 0.0}, {20.0, 20.0}};
  env.walls = {
      {{0.0, 0.0}, {20.0, 0.0}, true},  {{20.0, 0.0}, {20.0, 20.0}, true},
      {{20.0, 20.0}, {0.0, 20.0}, true}, {{0.0, 20.0}, {0.0, 0.0}, true},
      {{5.0, 5.0}, {5.0, 9.0}, true},    {{14.0, 13.0}, {17.0, 13.0}, true},
  };
  env.base_stations = {
      {0, {1.0, 1.0}},  {1, {12.0, 1.0}}, {2, {19.0, 7.0}},
      {3, {19.0, 19.0}}, {4, {8.0, 19.0}}, {5, {1.0, 13.0}},
  };
  env.blockers = {
      {{8.0, 8.0}, {12.0, 8.0}, false},
      {{13.0, 3.5}, {13.0, 6.5}, false},
      {{4.0, 14.5}, {7.0, 15.5}, false},
  };
  return env;
}

EnvironmentSpec open_environment(double width, double height, int num_stations) {
  if (num_stations < 2) throw Error("open environment needs at least 2 stations");
  EnvironmentSpec env;
  env.bounds = {{0.0, 0.0}, {width, height}};
  // Stations spread along the perimeter, 1 m inside the bounds.
  const double w = width - 2.0;
  const double h = height - 2.0;
  const double perimeter = 2.0 * (w + h);
  for (int k = 0; k < num_stations; ++k) {
    double s = perimeter * (k + 0.25) / num_stations;
    Vec2 p;
    if (s < w) {
      p = {1.0 + s, 1.0};
    } else if ((s -= w) < h) {
      p = {1.0 + w, 1.0 + s};
    } else if ((s -= h) < w) {
      p = {1.0 + w - s, 1.0 + h};
    } else {
      s -= w;
      p = {1.0, 1.0 + h - s};
    }
    env.base_stations.push_back({k, p});
  }
  return env;
}

}  // namespace geochart::sim

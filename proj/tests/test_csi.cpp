#include <doctest.h>

#include <cmath>
#include <random>

#include "geochart/csi.hpp"
#include "oracles.hpp"

using namespace geochart;
using namespace geochart::csi;

namespace {

sim::CirSnapshot random_snapshot(std::mt19937_64& gen, int stations, int length, double fs, int max_shift) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> shift(0, max_shift);
  sim::CirSnapshot s;
  s.num_stations = stations;
  s.cir_length = length;
  for (int i = 0; i < stations * length; ++i) s.cirs.push_back(u(gen));
  for (int k = 0; k < stations; ++k) s.measured_toa.push_back((shift(gen) + 0.3 * (u(gen) - 0.5)) / fs);
  return s;
}

AlignedTensor random_tensor(std::mt19937_64& gen, int rows, int cols) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  AlignedTensor t;
  t.rows = rows;
  t.cols = cols;
  t.sample_rate = 1e9;
  for (int i = 0; i < rows * cols; ++i) t.values.push_back(u(gen));
  return t;
}

}  // namespace

TEST_CASE("preprocess: zero ToA keeps the raw CIR and pads the tail") {
  std::mt19937_64 gen(1);
  auto s = random_snapshot(gen, 3, 10, 1e9, 0);
  for (double& t : s.measured_toa) t = 0.0;
  const auto a = preprocess(s, 1e9, 16);
  for (int k = 0; k < 3; ++k) {
    for (int c = 0; c < 10; ++c) CHECK(a.at(k, c) == s.cir(k, c));
    for (int c = 10; c < 16; ++c) CHECK(a.at(k, c) == 0.0);
  }
}

TEST_CASE("preprocess: two samples of ToA shift by two columns") {
  std::mt19937_64 gen(2);
  auto s = random_snapshot(gen, 1, 8, 1e9, 0);
  s.measured_toa[0] = 2e-9;
  const auto a = preprocess(s, 1e9, 12);
  CHECK(a.at(0, 0) == 0.0);
  CHECK(a.at(0, 1) == 0.0);
  for (int c = 0; c < 8; ++c) CHECK(a.at(0, c + 2) == s.cir(0, c));
}

TEST_CASE("preprocess: inverse shift recovers the raw CIR") {
  std::mt19937_64 gen(3);
  for (int trial = 0; trial < 50; ++trial) {
    const auto s = random_snapshot(gen, 6, 20, 1e9, 30);
    const auto a = preprocess(s, 1e9, required_window({s}, 1e9));
    for (int k = 0; k < 6; ++k) {
      const auto row = unshift_row(a, k, s.measured_toa[k], 20);
      for (int c = 0; c < 20; ++c) CHECK(row[c] == s.cir(k, c));
    }
  }
}

TEST_CASE("preprocess: window overflow and negative shifts are errors") {
  std::mt19937_64 gen(4);
  auto s = random_snapshot(gen, 2, 10, 1e9, 0);
  s.measured_toa = {0.0, 5e-9};
  CHECK_THROWS_WITH_AS(preprocess(s, 1e9, 14), doctest::Contains("station row 1"), Error);
  CHECK_NOTHROW(preprocess(s, 1e9, 15));
  s.measured_toa = {-3e-9, 0.0};
  CHECK_THROWS_AS(preprocess(s, 1e9, 20), Error);
}

TEST_CASE("preprocess: L1 row normalization") {
  std::mt19937_64 gen(5);
  auto s = random_snapshot(gen, 3, 10, 1e9, 3);
  for (int c = 0; c < 10; ++c) s.cirs[2 * 10 + c] = 0.0;
  const auto a = preprocess(s, 1e9, 20, RowNorm::L1);
  for (int k = 0; k < 2; ++k) {
    double sum = 0.0;
    for (int c = 0; c < 20; ++c) sum += a.at(k, c);
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  }
  for (int c = 0; c < 20; ++c) CHECK(a.at(2, c) == 0.0);
  CHECK(row_norm_from_string(to_string(RowNorm::L1)) == RowNorm::L1);
  CHECK_THROWS_AS(row_norm_from_string("l2"), Error);
}

TEST_CASE("default window holds every simulated shift") {
  const auto env = sim::default_environment();
  sim::RadioConfig radio;
  radio.toa_noise_std = 0.0;
  sim::TrajectorySpec spec;
  spec.kind = sim::TrajectoryKind::Grid;
  spec.spacing = 0.5;
  Rng rng(1);
  const auto ds = sim::generate_dataset(env, radio, sim::generate_trajectory(env, spec, rng), 3);
  CHECK(required_window(ds.snapshots, radio.sample_rate) <= default_window(env, radio));
}

TEST_CASE("cir_distance: definition examples") {
  std::mt19937_64 gen(6);
  const auto a = random_tensor(gen, 4, 30);
  CHECK(cir_distance(a, a) == 0.0);

  AlignedTensor x, y;
  x.rows = y.rows = 1;
  x.cols = y.cols = 8;
  x.sample_rate = y.sample_rate = 1e9;
  x.values.assign(8, 0.0);
  y.values.assign(8, 0.0);
  x.values[0] = 1.0;
  y.values[5] = 1.0;
  CHECK(cir_distance(x, y) == 2.0);

  for (int trial = 0; trial < 20; ++trial) {
    const auto p = random_tensor(gen, 6, 40);
    const auto q = random_tensor(gen, 6, 40);
    double naive = 0.0;
    for (int r = 0; r < 6; ++r)
      for (int c = 0; c < 40; ++c) naive += std::abs(p.at(r, c) - q.at(r, c));
    CHECK(cir_distance(p, q) == doctest::Approx(naive).epsilon(1e-13));
  }
}

TEST_CASE("cir_distance: shape and sample rate mismatches") {
  std::mt19937_64 gen(7);
  const auto a = random_tensor(gen, 4, 30);
  const auto b = random_tensor(gen, 4, 31);
  CHECK_THROWS_WITH_AS(cir_distance(a, b), doctest::Contains("shape mismatch"), Error);
  auto c = random_tensor(gen, 4, 30);
  c.sample_rate = 2e9;
  CHECK_THROWS_AS(cir_distance(a, c), Error);
}

TEST_CASE("true_delay_distance") {
  using sim::Mpc;
  const sim::MpcList a{{Mpc{10e-9, {1, 0}, 0}}};
  const sim::MpcList b{{Mpc{13e-9, {1, 0}, 0}}};
  CHECK(true_delay_distance(a, a, sim::Mode::ToF) == 0.0);
  CHECK(true_delay_distance(a, b, sim::Mode::ToF) == doctest::Approx(3e-9).epsilon(1e-12));
  CHECK_THROWS_AS(true_delay_distance(a, sim::MpcList{{}}, sim::Mode::ToF), Error);

  std::mt19937_64 gen(8);
  std::uniform_real_distribution<double> u(1e-9, 60e-9);
  std::uniform_int_distribution<int> len(1, 4);
  for (int trial = 0; trial < 30; ++trial) {
    sim::MpcList p(5), q(5);
    for (int k = 0; k < 5; ++k) {
      for (int n = len(gen); n > 0; --n) p[k].push_back({u(gen), {1, 0}, 0});
      for (int n = len(gen); n > 0; --n) q[k].push_back({u(gen), {1, 0}, 0});
      auto by_delay = [](const Mpc& l, const Mpc& r) { return l.delay < r.delay; };
      std::sort(p[k].begin(), p[k].end(), by_delay);
      std::sort(q[k].begin(), q[k].end(), by_delay);
    }
    double tof = 0.0;
    for (int k = 0; k < 5; ++k)
      for (std::size_t n = 0; n < std::min(p[k].size(), q[k].size()); ++n) tof += std::abs(p[k][n].delay - q[k][n].delay);
    CHECK(true_delay_distance(p, q, sim::Mode::ToF) == doctest::Approx(tof).epsilon(1e-12));

    int rp = 0, rq = 0;
    for (int k = 1; k < 5; ++k) {
      if (p[k][0].delay < p[rp][0].delay) rp = k;
      if (q[k][0].delay < q[rq][0].delay) rq = k;
    }
    double tdoa = 0.0;
    for (int k = 0; k < 5; ++k)
      for (std::size_t n = 0; n < std::min(p[k].size(), q[k].size()); ++n)
        tdoa += std::abs((p[k][n].delay - p[rp][0].delay) - (q[k][n].delay - q[rq][0].delay));
    CHECK(true_delay_distance(p, q, sim::Mode::TDoA) == doctest::Approx(tdoa).epsilon(1e-12));
  }
}

TEST_CASE("noiseless single path: CIR distance grows linearly below the pulse width") {
  // One station, pulse moved in sub-sample steps; L1 distance between sampled
  // sincs is near linear in the delay offset inside the main lobe.
  sim::RadioConfig radio;
  radio.toa_noise_std = 0.0;
  std::vector<double> off, dist;
  Rng rng(1);
  const auto ref = sim::simulate_cir({{20e-9, {1, 0}, 0}}, radio, rng, 0.0).magnitude;
  for (int s = 1; s <= 20; ++s) {
    const double dt = s * 0.05e-9;  // up to 1 ns = 0.3 m
    const auto m = sim::simulate_cir({{20e-9 + dt, {1, 0}, 0}}, radio, rng, 0.0).magnitude;
    double d = 0.0;
    for (std::size_t t = 0; t < m.size(); ++t) d += std::abs(m[t] - ref[t]);
    off.push_back(dt);
    dist.push_back(d);
  }
  CHECK(oracle::pearson(off, dist) >= 0.95);
}

#include "geochart/csi.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace geochart::csi {

int shift_columns(double toa, double sample_rate) { return static_cast<int>(nearest_sample(toa, sample_rate)); }

int required_window(const std::vector<sim::CirSnapshot>& snapshots, double sample_rate) {
  int need = 0;
  for (const auto& s : snapshots) {
    for (double toa : s.measured_toa) need = std::max(need, shift_columns(toa, sample_rate) + s.cir_length);
  }
  return need;
}

int default_window(const sim::EnvironmentSpec& env, const sim::RadioConfig& radio, int margin) {
  const double max_delay = (radio.max_reflection_order + 1) * env.diagonal() / radio.c;
  return radio.cir_length + static_cast<int>(std::ceil(max_delay * radio.sample_rate)) + margin;
}

std::string to_string(RowNorm norm) { return norm == RowNorm::L1 ? "l1" : "none"; }

RowNorm row_norm_from_string(const std::string& s) {
  if (s == "none") return RowNorm::None;
  if (s == "l1") return RowNorm::L1;
  throw Error("unknown CIR normalization '" + s + "' (expected none or l1)");
}

AlignedTensor preprocess(const sim::CirSnapshot& snapshot, double sample_rate, int window_length, RowNorm norm) {
  AlignedTensor out;
  out.rows = snapshot.num_stations;
  out.cols = window_length;
  out.sample_rate = sample_rate;
  out.window_origin = 0.0;
  out.values.assign(static_cast<std::size_t>(out.rows) * out.cols, 0.0);
  for (int k = 0; k < snapshot.num_stations; ++k) {
    const int shift = shift_columns(snapshot.measured_toa[k], sample_rate);
    if (shift < 0) {
      throw Error("snapshot " + std::to_string(snapshot.index) + ", station row " + std::to_string(k) +
                  ": negative ToA shift of " + std::to_string(shift) + " columns");
    }
    if (shift + snapshot.cir_length > window_length) {
      std::ostringstream os;
      os << "snapshot " << snapshot.index << ", station row " << k << ": shift of " << shift
         << " columns needs a window of " << shift + snapshot.cir_length << " columns, have " << window_length;
      throw Error(os.str());
    }
    double scale = 1.0;
    if (norm == RowNorm::L1) {
      double sum = 0.0;
      for (int t = 0; t < snapshot.cir_length; ++t) sum += snapshot.cir(k, t);
      if (sum > 0.0) scale = 1.0 / sum;
    }
    for (int t = 0; t < snapshot.cir_length; ++t) {
      out.values[static_cast<std::size_t>(k) * out.cols + shift + t] = scale * snapshot.cir(k, t);
    }
  }
  return out;
}

std::vector<AlignedTensor> preprocess_all(const std::vector<sim::CirSnapshot>& snapshots, double sample_rate,
                                          int window_length, RowNorm norm) {
  std::vector<AlignedTensor> out;
  out.reserve(snapshots.size());
  for (const auto& s : snapshots) out.push_back(preprocess(s, sample_rate, window_length, norm));
  return out;
}

std::vector<double> unshift_row(const AlignedTensor& tensor, int station, double toa, int cir_length) {
  const int shift = shift_columns(toa, tensor.sample_rate);
  if (shift < 0 || shift + cir_length > tensor.cols) throw Error("shift exceeds the tensor window");
  std::vector<double> row(cir_length);
  for (int t = 0; t < cir_length; ++t) row[t] = tensor.at(station, shift + t);
  return row;
}

double cir_distance(const AlignedTensor& a, const AlignedTensor& b) {
  if (a.rows != b.rows || a.cols != b.cols) {
    std::ostringstream os;
    os << "tensor shape mismatch: [" << a.rows << "x" << a.cols << "] vs [" << b.rows << "x" << b.cols << "]";
    throw Error(os.str());
  }
  if (a.sample_rate != b.sample_rate) throw Error("tensor sample rates differ");
  double sum = 0.0;
  const std::size_t n = a.values.size();
  for (std::size_t i = 0; i < n; ++i) sum += std::abs(a.values[i] - b.values[i]);
  return sum;
}

namespace {

std::size_t reference_station(const sim::MpcList& mpcs, std::span<const int> ids) {
  std::size_t ref = 0;
  for (std::size_t k = 1; k < mpcs.size(); ++k) {
    const double dk = mpcs[k].front().delay;
    const double dr = mpcs[ref].front().delay;
    const int id_k = ids.empty() ? static_cast<int>(k) : ids[k];
    const int id_r = ids.empty() ? static_cast<int>(ref) : ids[ref];
    if (dk < dr || (dk == dr && id_k < id_r)) ref = k;
  }
  return ref;
}

}  // namespace

double true_delay_distance(const sim::MpcList& a, const sim::MpcList& b, sim::Mode mode,
                           std::span<const int> station_ids) {
  if (a.size() != b.size()) throw Error("MPC sets have different station counts");
  if (!station_ids.empty() && station_ids.size() != a.size()) throw Error("station id list has the wrong length");
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (a[k].empty() || b[k].empty()) throw Error("empty MPC list at station row " + std::to_string(k));
  }
  double sum = 0.0;
  if (mode == sim::Mode::ToF) {
    for (std::size_t k = 0; k < a.size(); ++k) {
      const std::size_t shared = std::min(a[k].size(), b[k].size());
      for (std::size_t n = 0; n < shared; ++n) sum += std::abs(a[k][n].delay - b[k][n].delay);
    }
    return sum;
  }
  const double ref_a = a[reference_station(a, station_ids)].front().delay;
  const double ref_b = b[reference_station(b, station_ids)].front().delay;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const std::size_t shared = std::min(a[k].size(), b[k].size());
    for (std::size_t n = 0; n < shared; ++n) {
      sum += std::abs((a[k][n].delay - ref_a) - (b[k][n].delay - ref_b));
    }
  }
  return sum;
}

}  // namespace geochart::csi

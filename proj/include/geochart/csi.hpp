#pragma once

// Preprocessing of CIR snapshots into time-aligned tensors, and the local
// CIR distances computed on them.

#include <span>
#include <string>
#include <vector>

#include "geochart/sim.hpp"

namespace geochart::csi {

/// [rows x cols] magnitudes; row k holds station k's CIR placed at the column
/// offset given by its measured ToF/TDoA. Cells outside the CIR are zero.
struct AlignedTensor {
  int rows = 0;
  int cols = 0;
  double sample_rate = 0.0;
  double window_origin = 0.0;  // absolute time of column 0, s
  std::vector<double> values;  // row-major

  double at(int r, int c) const { return values[static_cast<std::size_t>(r) * cols + c]; }
  std::span<const double> flat() const { return values; }
};

/// Column offset for a measured ToF/TDoA (nearest-sample rounding).
int shift_columns(double toa, double sample_rate);

/// Smallest window length that holds every shifted CIR of the given snapshots.
int required_window(const std::vector<sim::CirSnapshot>& snapshots, double sample_rate);

/// Window length covering any first path the simulator can produce: a path
/// with R reflections has R + 1 straight legs inside the bounds, so its length
/// is at most (R + 1) times the environment diagonal. `margin` columns extra.
int default_window(const sim::EnvironmentSpec& env, const sim::RadioConfig& radio, int margin = 8);

/// Optional per-row scaling. L1 divides each station's CIR by its magnitude
/// sum (an automatic gain control), leaving all-zero rows untouched.
enum class RowNorm { None, L1 };

std::string to_string(RowNorm norm);
RowNorm row_norm_from_string(const std::string& s);

AlignedTensor preprocess(const sim::CirSnapshot& snapshot, double sample_rate, int window_length,
                         RowNorm norm = RowNorm::None);

std::vector<AlignedTensor> preprocess_all(const std::vector<sim::CirSnapshot>& snapshots, double sample_rate,
                                          int window_length, RowNorm norm = RowNorm::None);

/// Raw CIR of `station` recovered from an aligned tensor by undoing its shift.
std::vector<double> unshift_row(const AlignedTensor& tensor, int station, double toa, int cir_length);

/// Sum of absolute magnitude differences over all stations and time steps.
double cir_distance(const AlignedTensor& a, const AlignedTensor& b);

/// Delay-domain distance on simulator ground truth: MPCs are paired per
/// station by sorted index up to the shorter list.
double true_delay_distance(const sim::MpcList& a, const sim::MpcList& b, sim::Mode mode,
                           std::span<const int> station_ids = {});

}  // namespace geochart::csi

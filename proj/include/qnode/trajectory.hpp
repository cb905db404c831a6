#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

namespace qnode {

/// Expectation values (<sx>, <sy>, <sz>) of one qubit state.
struct BlochPoint {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  double norm() const { return std::sqrt(x * x + y * y + z * z); }
  friend bool operator==(const BlochPoint&, const BlochPoint&) = default;
};

/// Bloch-vector time series on a strictly increasing grid. Shared by the
/// simulator (ground truth) and the model decoder (predictions).
struct Trajectory {
  std::vector<double> times;
  std::vector<BlochPoint> points;

  std::size_t size() const { return times.size(); }
  friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

/// t_i = i * spacing for i = 0..count-1. Every grid in the pipeline is built
/// through this so that prefixes of longer grids are bit-identical.
inline std::vector<double> uniform_grid(double spacing, std::size_t count) {
  std::vector<double> t(count);
  for (std::size_t i = 0; i < count; ++i) t[i] = static_cast<double>(i) * spacing;
  return t;
}

}  // namespace qnode

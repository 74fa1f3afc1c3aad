#pragma once

#include <array>
#include <filesystem>
#include <vector>

#include "lamella/envelope.hpp"

namespace lamella {

/// One coordinate of the xibar grid. count == 1 pins the coordinate at lo.
struct TableAxis {
  double lo = 0.0;
  double hi = 0.0;
  int count = 1;

  double node(int k) const { return count == 1 ? lo : lo + (hi - lo) * k / (count - 1); }
};

/// Axis k addresses xibar(k / 2, k % 2), i.e. the CSV column xibar_{row}{col}.
using TableAxes = std::array<TableAxis, 6>;

/// QW_0 tabulated on a tensor grid of planar matrices, multilinear in between.
/// Outside the grid (or off a pinned coordinate) it falls back to W_0.
class EnvelopeTable {
 public:
  EnvelopeTable(TableAxes axes, std::vector<double> values, EnvelopeMethod method, int resolution,
                PlanarDensity fallback);

  /// Evaluates the estimator at every grid point. Points are independent, so the
  /// work is split over `jobs` threads with a fixed output slot per point.
  static EnvelopeTable build(const TableAxes& axes, const PlanarDensity& w0,
                             const EnvelopeEstimator& estimator, int jobs = 1);

  static EnvelopeTable read(const std::filesystem::path& path, PlanarDensity fallback);
  void write(const std::filesystem::path& path) const;

  bool covers(const PlanarMatrix& xibar) const;
  double value(const PlanarMatrix& xibar) const;
  /// Derivative of the interpolant; pinned coordinates take the W_0 partial.
  PlanarMatrix gradient(const PlanarMatrix& xibar) const;

  const TableAxes& axes() const { return axes_; }
  const std::vector<double>& values() const { return values_; }
  EnvelopeMethod method() const { return method_; }
  int resolution() const { return resolution_; }
  std::size_t size() const { return values_.size(); }
  PlanarMatrix point(std::size_t flat) const;

 private:
  TableAxes axes_;
  std::vector<double> values_;
  EnvelopeMethod method_;
  int resolution_;
  PlanarDensity fallback_;
};

}  // namespace lamella

#pragma once

#include <functional>
#include <vector>

#include "lamella/energy.hpp"

namespace lamella {

/// A density on planar matrices, evaluable anywhere. `gradient` may be empty,
/// in which case consumers fall back to central differences.
struct PlanarDensity {
  std::function<double(const PlanarMatrix&)> value;
  std::function<PlanarMatrix(const PlanarMatrix&)> gradient;

  double operator()(const PlanarMatrix& xibar) const { return value(xibar); }
  PlanarMatrix grad(const PlanarMatrix& xibar) const;
};

/// W_0 of a model as a planar density. Every built-in kind admits a closed form
/// (the infimum over z commutes with the double-well minimum), so this is the
/// fast path used by the estimators; relax_transverse is the Newton route.
PlanarDensity make_w0(const DensityModel& model);

/// Rank-one directions a (x) n that the double well wants to laminate along.
std::vector<PlanarMatrix> laminate_seeds(const DensityModel& model);

struct LaminationConfig {
  int directions = 32;        ///< unit normals n over a half circle
  int amplitudes = 16;        ///< log-spaced amplitudes per side
  double amplitude_min = 1e-3;
  double amplitude_max = 10.0;
  int max_depth = 3;
  /// Coarser grids used for the inner R_k evaluations when depth > 1.
  int nested_directions = 8;
  int nested_amplitudes = 8;
  bool polish = true;
  std::vector<PlanarMatrix> seeds;  ///< extra rank-one directions to try
};

/// Depth-k rank-one lamination upper bound R_k W_0(xibar).
EnvelopeEstimate quasiconvexify_lamination(const PlanarDensity& w0, const PlanarMatrix& xibar,
                                           int depth, const LaminationConfig& config = {});

struct CellConfig {
  int max_iterations = 4000;
  double gradient_tolerance = 1e-11;
  double function_tolerance = 1e-13;
  std::vector<PlanarMatrix> seeds;  ///< rank-one directions for sawtooth starts
};

/// Cell-problem estimate: min over phi in W^{1,inf}_0(Q') of the average of
/// W_0(xibar + grad phi), phi bilinear on an n x n grid, midpoint quadrature.
EnvelopeEstimate quasiconvexify_cell(const PlanarDensity& w0, const PlanarMatrix& xibar,
                                     int mesh_n, const CellConfig& config = {});

/// Which estimator stands in for QW_0.
struct EnvelopeEstimator {
  EnvelopeMethod method = EnvelopeMethod::lamination;
  int depth = 1;
  int mesh_n = 8;
  LaminationConfig lamination;
  CellConfig cell;
  double h_floor = 1e-7;

  EnvelopeEstimate evaluate(const PlanarDensity& w0, const PlanarMatrix& xibar) const;
};

/// Entrywise central differences of the estimator.
PlanarMatrix grad_qw0(const EnvelopeEstimator& estimator, const PlanarDensity& w0,
                      const PlanarMatrix& xibar, double h);

}  // namespace lamella

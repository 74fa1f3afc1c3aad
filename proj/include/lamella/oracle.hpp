#pragma once

#include <functional>
#include <vector>

namespace lamella {

/// Scalar convex elastic density with a known minimizing slope.
struct ElasticDensity1d {
  std::function<double(double)> f = [](double s) { return s * s; };
  double argmin = 0.0;

  static ElasticDensity1d square() { return {}; }
};

/// 1D Griffith problem on (0, length) split into n equal cells; jumps may sit
/// on the n - 1 interior cell interfaces.
struct Dp1dProblem {
  int n = 2;
  double length = 1.0;
  double toughness = 1.0;
  double left = 0.0;
  double right = 0.0;
  ElasticDensity1d density;

  void validate() const;  ///< throws ConfigError
};

struct Dp1dSolution {
  double energy = 0.0;
  std::vector<int> jumps;            ///< interface indices in 1..n-1, ascending
  std::vector<double> jump_positions;
  std::vector<double> cell_values;   ///< u at the cell centers
};

/// Exact minimum of elastic + toughness * #jumps over piecewise-affine u with
/// at most max_jumps jumps. Ties: fewer jumps, then lower interfaces.
Dp1dSolution dp_minimize_1d(const Dp1dProblem& p, int max_jumps);

/// Energy of one segment [a, b] (cell indices, b exclusive). Segments touching a
/// boundary datum on both ends pay len f(delta / len); all others relax freely.
double dp_segment_cost(const Dp1dProblem& p, int a, int b, bool left_fixed, bool right_fixed);

struct DpScanRow {
  double delta;
  double energy;
  int n_jumps;
};

/// Minimum energy over a list of boundary openings delta = right - left (left = 0).
std::vector<DpScanRow> dp_scan(Dp1dProblem p, const std::vector<double>& deltas, int max_jumps);

/// Lower convex envelope of the samples, evaluated at the sample abscissae.
std::vector<double> convex_envelope_1d(const std::vector<double>& x, const std::vector<double>& f);

}  // namespace lamella

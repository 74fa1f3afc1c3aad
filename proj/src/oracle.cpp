#include "lamella/oracle.hpp"

#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "lamella/errors.hpp"

namespace lamella {

void Dp1dProblem::validate() const {
  if (n < 2) throw ConfigError(fmt::format("1D problem needs n >= 2 (got {})", n));
  if (!(length > 0.0)) throw ConfigError("1D problem length must be positive");
  if (!(toughness > 0.0)) throw ConfigError("toughness must be positive");
  if (!std::isfinite(left) || !std::isfinite(right)) throw ConfigError("boundary values must be finite");
}

double dp_segment_cost(const Dp1dProblem& p, int a, int b, bool left_fixed, bool right_fixed) {
  const double len = p.length * (b - a) / p.n;
  if (left_fixed && right_fixed) return len * p.density.f((p.right - p.left) / len);
  return len * p.density.f(p.density.argmin);
}

Dp1dSolution dp_minimize_1d(const Dp1dProblem& p, int max_jumps) {
  p.validate();
  if (max_jumps < 0 || max_jumps > p.n - 1)
    throw ConfigError(fmt::format("max_jumps {} outside [0, {}]", max_jumps, p.n - 1));
  const int n = p.n;
  const double inf = std::numeric_limits<double>::infinity();

  // best[k][i]: cells [0, i) with the k-th jump at interface i (k >= 1), the
  // segment ending at i not yet closed on its right. parent[k][i]: previous jump.
  std::vector<std::vector<double>> best(max_jumps + 1, std::vector<double>(n, inf));
  std::vector<std::vector<int>> parent(max_jumps + 1, std::vector<int>(n, -1));
  for (int i = 1; i < n && max_jumps >= 1; ++i) best[1][i] = dp_segment_cost(p, 0, i, true, false);
  for (int k = 2; k <= max_jumps; ++k)
    for (int i = k; i < n; ++i)
      for (int q = k - 1; q < i; ++q) {
        if (best[k - 1][q] == inf) continue;
        const double c = (best[k - 1][q] + p.toughness) + dp_segment_cost(p, q, i, false, false);
        if (c < best[k][i]) {
          best[k][i] = c;
          parent[k][i] = q;
        }
      }

  Dp1dSolution sol;
  sol.energy = dp_segment_cost(p, 0, n, true, true);
  int best_k = 0, best_last = -1;
  for (int k = 1; k <= max_jumps; ++k)
    for (int i = k; i < n; ++i) {
      if (best[k][i] == inf) continue;
      const double c = (best[k][i] + p.toughness) + dp_segment_cost(p, i, n, false, true);
      if (c < sol.energy) {
        sol.energy = c;
        best_k = k;
        best_last = i;
      }
    }

  for (int k = best_k, i = best_last; k >= 1; i = parent[k][i], --k) sol.jumps.insert(sol.jumps.begin(), i);
  for (int i : sol.jumps) sol.jump_positions.push_back(p.length * i / n);

  // Reconstruct u at cell centers.
  const double h = p.length / n;
  sol.cell_values.resize(n);
  if (sol.jumps.empty()) {
    for (int c = 0; c < n; ++c) sol.cell_values[c] = p.left + (p.right - p.left) * (c + 0.5) / n;
  } else {
    std::vector<int> cuts{0};
    cuts.insert(cuts.end(), sol.jumps.begin(), sol.jumps.end());
    cuts.push_back(n);
    const double s = p.density.argmin;
    for (std::size_t seg = 0; seg + 1 < cuts.size(); ++seg) {
      const bool last = seg + 2 == cuts.size();
      for (int c = cuts[seg]; c < cuts[seg + 1]; ++c) {
        sol.cell_values[c] = last ? p.right - s * h * (n - c - 0.5)
                                  : p.left + s * h * (c - cuts[seg] + 0.5);
      }
    }
  }
  return sol;
}

std::vector<DpScanRow> dp_scan(Dp1dProblem p, const std::vector<double>& deltas, int max_jumps) {
  std::vector<DpScanRow> rows;
  for (double d : deltas) {
    p.left = 0.0;
    p.right = d;
    const auto s = dp_minimize_1d(p, max_jumps);
    rows.push_back({d, s.energy, static_cast<int>(s.jumps.size())});
  }
  return rows;
}

std::vector<double> convex_envelope_1d(const std::vector<double>& x, const std::vector<double>& f) {
  if (x.size() != f.size()) throw DomainError("envelope: x and f differ in length");
  if (x.size() < 2) throw DomainError("envelope needs at least two samples");
  for (std::size_t k = 1; k < x.size(); ++k)
    if (!(x[k] > x[k - 1])) throw DomainError("envelope: x must be strictly increasing");

  // Lower hull by monotone chain.
  std::vector<std::size_t> hull;
  for (std::size_t k = 0; k < x.size(); ++k) {
    while (hull.size() >= 2) {
      const std::size_t a = hull[hull.size() - 2], b = hull.back();
      const double cross = (x[b] - x[a]) * (f[k] - f[a]) - (f[b] - f[a]) * (x[k] - x[a]);
      if (cross <= 0.0)
        hull.pop_back();
      else
        break;
    }
    hull.push_back(k);
  }

  std::vector<double> env(x.size());
  std::size_t seg = 0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    while (seg + 1 < hull.size() - 1 && x[hull[seg + 1]] <= x[k]) ++seg;
    const std::size_t a = hull[seg], b = hull[seg + 1];
    if (k == a) {
      env[k] = f[a];
    } else if (k == b) {
      env[k] = f[b];
    } else {
      const double t = (x[k] - x[a]) / (x[b] - x[a]);
      env[k] = (1.0 - t) * f[a] + t * f[b];
    }
  }
  return env;
}

}  // namespace lamella

#include "lamella/discretization.hpp"

#include <cmath>

namespace lamella {

CellKernel::CellKernel(const Grid& grid, Quadrature rule) : grid_(grid) {
  const bool planar = grid.planar();
  per_cell_ = planar ? 4 : 8;
  const double hx = grid.hx(), hy = grid.hy(), hz = planar ? 2.0 : grid.hz();
  const double volume = hx * hy * hz;

  // Reference coordinates in [0, 1].
  std::vector<double> pts, wts;
  if (rule == Quadrature::gauss) {
    const double g = 0.5 / std::sqrt(3.0);
    pts = {0.5 - g, 0.5 + g};
    wts = {0.5, 0.5};
  } else {
    pts = {0.5};
    wts = {1.0};
  }
  const int nzq = planar ? 1 : static_cast<int>(pts.size());
  for (int c = 0; c < nzq; ++c)
    for (int b = 0; b < static_cast<int>(pts.size()); ++b)
      for (int a = 0; a < static_cast<int>(pts.size()); ++a) {
        const double s = pts[a], t = pts[b], r = planar ? 0.5 : pts[c];
        QuadPoint q;
        q.weight = volume * wts[a] * wts[b] * (planar ? 1.0 : wts[c]);
        for (int node = 0; node < per_cell_; ++node) {
          const int bx = node & 1, by = (node >> 1) & 1, bz = (node >> 2) & 1;
          const double fx = bx ? s : 1.0 - s, dx = bx ? 1.0 : -1.0;
          const double fy = by ? t : 1.0 - t, dy = by ? 1.0 : -1.0;
          double fz = 1.0, dz = 0.0;
          if (!planar) {
            fz = bz ? r : 1.0 - r;
            dz = bz ? 1.0 : -1.0;
          }
          q.n[node] = fx * fy * fz;
          q.dn[node] = Vec3(dx * fy * fz / hx, fx * dy * fz / hy, planar ? 0.0 : fx * fy * dz / hz);
        }
        points_.push_back(q);
      }
}

std::array<int, 8> CellKernel::cell_nodes(int cell) const {
  int i, j, k;
  grid_.cell_ijk(cell, i, j, k);
  std::array<int, 8> out{};
  for (int node = 0; node < per_cell_; ++node) {
    const int bx = node & 1, by = (node >> 1) & 1, bz = (node >> 2) & 1;
    out[node] = grid_.node(i + bx, j + by, k + bz);
  }
  return out;
}

DofMap make_dof_map(const Grid& grid) {
  DofMap map;
  map.index.assign(grid.node_count(), -1);
  for (int n = 0; n < grid.node_count(); ++n) {
    if (grid.dirichlet_node(n)) continue;
    map.index[n] = static_cast<int>(map.free_nodes.size());
    map.free_nodes.push_back(n);
  }
  return map;
}

}  // namespace lamella

#pragma once

#include <array>
#include <vector>

#include "lamella/grid.hpp"

namespace lamella {

enum class Quadrature { gauss, midpoint };

/// Multilinear (Q1) element data at one quadrature point of the reference cell,
/// already mapped to the uniform physical cell.
struct QuadPoint {
  double weight = 0.0;           ///< physical measure carried by the point
  std::array<double, 8> n{};     ///< shape values
  std::array<Vec3, 8> dn{};      ///< physical shape gradients (x3 entry unscaled)
};

/// Element kernel shared by every cell of a structured grid.
///
/// On planar grids each cell stands for omega-cell x I, so weights carry the
/// factor 2 = |I|; integrals of x3-invariant fields agree between 2D and 3D.
class CellKernel {
 public:
  CellKernel(const Grid& grid, Quadrature rule);

  int nodes_per_cell() const { return per_cell_; }
  const std::vector<QuadPoint>& points() const { return points_; }
  std::array<int, 8> cell_nodes(int cell) const;
  const Grid& grid() const { return grid_; }

 private:
  Grid grid_;
  int per_cell_;
  std::vector<QuadPoint> points_;
};

/// Scaled gradient (grad_alpha u | d3 u / eps) of a 3-component field at a quadrature point.
inline FullMatrix scaled_gradient_at(const Eigen::VectorXd& u, const std::array<int, 8>& nodes,
                                     int per_cell, const QuadPoint& q, double inv_eps) {
  FullMatrix f = FullMatrix::Zero();
  for (int a = 0; a < per_cell; ++a) {
    const Vec3 ua = u.segment<3>(3 * nodes[a]);
    f.col(0) += ua * q.dn[a][0];
    f.col(1) += ua * q.dn[a][1];
    f.col(2) += ua * (q.dn[a][2] * inv_eps);
  }
  return f;
}

/// Scaled gradient of a scalar field at a quadrature point.
inline Vec3 scalar_gradient_at(const Eigen::VectorXd& v, const std::array<int, 8>& nodes,
                               int per_cell, const QuadPoint& q, double inv_eps) {
  Vec3 g = Vec3::Zero();
  for (int a = 0; a < per_cell; ++a) g += v[nodes[a]] * q.dn[a];
  g[2] *= inv_eps;
  return g;
}

inline double value_at(const Eigen::VectorXd& v, const std::array<int, 8>& nodes, int per_cell,
                       const QuadPoint& q) {
  double s = 0.0;
  for (int a = 0; a < per_cell; ++a) s += v[nodes[a]] * q.n[a];
  return s;
}

/// Indices of the non-Dirichlet nodes, in increasing order, and the inverse map
/// (-1 for Dirichlet nodes).
struct DofMap {
  std::vector<int> free_nodes;
  std::vector<int> index;  ///< node -> free index or -1
};
DofMap make_dof_map(const Grid& grid);

}  // namespace lamella

#pragma once

#include <Eigen/Dense>

namespace lamella {

/// 3x3 deformation gradient (xi_bar | z).
using FullMatrix = Eigen::Matrix3d;
/// 3x2 in-plane deformation gradient xi_bar.
using PlanarMatrix = Eigen::Matrix<double, 3, 2>;
using Vec3 = Eigen::Vector3d;
using Vec2 = Eigen::Vector2d;
/// Second derivative of a density on 3x3 matrices, indexed by column-major vec(F).
using Hessian9 = Eigen::Matrix<double, 9, 9>;

inline FullMatrix join_columns(const PlanarMatrix& xibar, const Vec3& z) {
  FullMatrix out;
  out.leftCols<2>() = xibar;
  out.col(2) = z;
  return out;
}

inline PlanarMatrix planar_part(const FullMatrix& xi) { return xi.leftCols<2>(); }

}  // namespace lamella

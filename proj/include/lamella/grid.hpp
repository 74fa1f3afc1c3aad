#pragma once

#include <filesystem>
#include <functional>

#include <Eigen/Core>

#include "lamella/types.hpp"

namespace lamella {

enum FrameSide : unsigned {
  frame_left = 1u,    // x1 = 0
  frame_right = 2u,   // x1 = lx
  frame_bottom = 4u,  // x2 = 0
  frame_top = 8u,     // x2 = ly
  frame_all = 15u,
};

/// Structured grid over omega' x I, omega = (0, lx) x (0, ly), I = (-1, 1).
///
/// nx, ny count the cells of omega; `frame` extra cell layers are added on each
/// side listed in `frame_sides` (the Dirichlet region omega' \ omega). nz counts
/// transverse cells; nz == 1 marks the 2D midsurface grid (a single node layer).
struct Grid {
  int nx = 2;
  int ny = 2;
  int nz = 1;
  double lx = 1.0;
  double ly = 1.0;
  int frame = 1;
  unsigned frame_sides = frame_all;

  void validate() const;  ///< throws ConfigError

  bool planar() const { return nz == 1; }
  int pad_left() const { return frame_sides & frame_left ? frame : 0; }
  int pad_right() const { return frame_sides & frame_right ? frame : 0; }
  int pad_bottom() const { return frame_sides & frame_bottom ? frame : 0; }
  int pad_top() const { return frame_sides & frame_top ? frame : 0; }

  int cells_x() const { return nx + pad_left() + pad_right(); }
  int cells_y() const { return ny + pad_bottom() + pad_top(); }
  int cells_z() const { return planar() ? 1 : nz; }
  int nodes_x() const { return cells_x() + 1; }
  int nodes_y() const { return cells_y() + 1; }
  int nodes_z() const { return planar() ? 1 : nz + 1; }
  int node_count() const { return nodes_x() * nodes_y() * nodes_z(); }
  int cell_count() const { return cells_x() * cells_y() * cells_z(); }

  double hx() const { return lx / nx; }
  double hy() const { return ly / ny; }
  double hz() const { return 2.0 / nz; }
  double min_spacing() const;
  double omega_area() const { return lx * ly; }

  int node(int i, int j, int k = 0) const { return i + nodes_x() * (j + nodes_y() * k); }
  int cell(int i, int j, int k = 0) const { return i + cells_x() * (j + cells_y() * k); }
  void node_ijk(int n, int& i, int& j, int& k) const;
  void cell_ijk(int c, int& i, int& j, int& k) const;

  /// Physical position; x3 = 0 on planar grids.
  Vec3 position(int n) const;
  /// Cell lies in omega (bulk energy is integrated there only).
  bool cell_in_omega(int c) const;
  /// Node carries Dirichlet data: outside the open omega on a framed side.
  bool dirichlet_node(int n) const;

  bool operator==(const Grid& o) const {
    return nx == o.nx && ny == o.ny && nz == o.nz && lx == o.lx && ly == o.ly &&
           frame == o.frame && frame_sides == o.frame_sides;
  }
};

/// Nodal field with 1 or 3 components, stored node-major.
struct Field {
  Grid grid;
  int components = 1;
  Eigen::VectorXd values;

  Field() = default;
  Field(const Grid& g, int comps, double fill = 0.0);

  static Field from_function(const Grid& g, int comps,
                             const std::function<Eigen::VectorXd(const Vec3&)>& f);

  double& at(int node, int c = 0) { return values[node * components + c]; }
  double at(int node, int c = 0) const { return values[node * components + c]; }
  Vec3 vec(int node) const { return Vec3(at(node, 0), at(node, 1), at(node, 2)); }
  void set_vec(int node, const Vec3& x);

  /// Max over nodes of the Euclidean norm of the nodal value.
  double sup_norm() const;
  void validate() const;  ///< throws DomainError on size mismatch or non-finite values
};

/// Flat CSV (node_index,x1,x2,x3,c0[,c1,c2]) plus a JSON sidecar with the grid.
void write_field(const std::filesystem::path& csv_path, const Field& f);
Field read_field(const std::filesystem::path& csv_path);

}  // namespace lamella

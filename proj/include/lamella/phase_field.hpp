#pragma once

#include <algorithm>
#include <memory>
#include <optional>
#include <vector>

#include "lamella/discretization.hpp"
#include "lamella/energy.hpp"
#include "lamella/grid.hpp"

namespace lamella {

class EnvelopeTable;

/// Bulk integrand as seen by the discrete energies and solvers.
class BulkDensity {
 public:
  virtual ~BulkDensity() = default;
  virtual double value(const FullMatrix& f) const = 0;
  virtual FullMatrix gradient(const FullMatrix& f) const = 0;
  virtual bool has_hessian() const { return false; }
  virtual Hessian9 hessian(const FullMatrix& f) const;
  /// M with W(F) = |F - M|^2 for every F.
  virtual std::optional<FullMatrix> quadratic_shift() const { return std::nullopt; }
  /// M(F) with W(G) <= |G - M(F)|^2 for all G and equality at G = F.
  virtual std::optional<FullMatrix> majorizer_shift(const FullMatrix&) const { return std::nullopt; }
};

using BulkDensityPtr = std::shared_ptr<const BulkDensity>;

/// W itself, for the 3D scaled problem.
BulkDensityPtr make_bulk_density(const DensityModel& model);
/// QW_0 acting on the leading 3x2 block, for the 2D relaxed problem. Kinds with
/// a convex W_0 use its closed form; the double well needs a table.
BulkDensityPtr make_limit_density(const DensityModel& model,
                                  std::shared_ptr<const EnvelopeTable> table = nullptr);

struct PhaseParams {
  double ell = 0.05;
  double eta = -1.0;       ///< negative selects the default 1e-6 * ell
  double toughness = 1.0;  ///< G_c
  bool enabled = true;     ///< false: elastic only, v == 1 and no degradation floor
  /// Divide G_c by 1 + h / (4 ell), the excess toughness of the discrete
  /// Q1 profile, so that the regularized crack costs G_c per unit area.
  bool effective_toughness = false;

  double eta_value() const { return enabled ? (eta < 0.0 ? 1e-6 * ell : eta) : 0.0; }
  /// Toughness actually used in the surface functional on this grid.
  double surface_toughness(const Grid& grid) const {
    if (!effective_toughness) return toughness;
    return toughness / (1.0 + std::min(grid.hx(), grid.hy()) / (4.0 * ell));
  }
  void validate() const;
  /// True when ell resolves the grid (ell > spacing).
  bool resolves(const Grid& grid) const { return ell > grid.min_spacing(); }
};

/// Per-cell scaled gradient at the cell center. eps is ignored on planar grids.
std::vector<FullMatrix> scaled_gradient(const Field& u, double eps);

/// int_Omega (v^2 + eta) W(scaled grad u) over omega cells (2x2(x2) Gauss points).
double at_bulk_energy(const Field& u, const Field& v, double eps, const BulkDensity& w,
                      const PhaseParams& pp);
double at_bulk_energy(const Field& u, const Field& v, double eps, const DensityModel& model,
                      const PhaseParams& pp);

struct SurfaceParts {
  double inplane = 0.0;     ///< G_c ell |grad_alpha v|^2
  double transverse = 0.0;  ///< G_c ell |d3 v / eps|^2
  double potential = 0.0;   ///< G_c (1 - v)^2 / (4 ell)
  double total() const { return inplane + transverse + potential; }
};

/// Phase-field surface energy over all cells of omega' x I.
SurfaceParts at_surface_parts(const Field& v, double eps, const PhaseParams& pp);
double at_surface_energy(const Field& v, double eps, const PhaseParams& pp);

struct Facet {
  double area = 0.0;
  Vec3 normal = Vec3::UnitX();
};

/// Sum of area * |(nu_alpha | nu_3 / eps)|.
double sharp_surface_energy(const std::vector<Facet>& facets, double eps);

/// Radial profile rho_i of the truncation map: identity below e^i, zero from
/// e^(i+1) on, C^1 with |rho'| <= 1 in between.
double truncation_profile(double r, int i);
Vec3 truncation_map(const Vec3& z, int i);
Field truncate(const Field& u, int i);

/// Throws DomainError if some nodal v leaves [0, 1] by more than 1e-12.
void check_phase_range(const Field& v);

}  // namespace lamella

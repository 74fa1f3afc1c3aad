#include "lamella/phase_field.hpp"

#include <cmath>

#include <fmt/format.h>

#include "lamella/envelope.hpp"
#include "lamella/errors.hpp"
#include "lamella/table.hpp"

namespace lamella {

Hessian9 BulkDensity::hessian(const FullMatrix&) const {
  throw ConfigError("density has no analytic Hessian");
}

namespace {

class ModelDensity final : public BulkDensity {
 public:
  explicit ModelDensity(DensityModel m) : m_(std::move(m)) {}
  double value(const FullMatrix& f) const override { return eval_w(m_, f); }
  FullMatrix gradient(const FullMatrix& f) const override { return grad_w(m_, f); }
  bool has_hessian() const override { return m_.kind == DensityKind::p_power; }
  Hessian9 hessian(const FullMatrix& f) const override { return hess_w(m_, f); }
  std::optional<FullMatrix> quadratic_shift() const override {
    if (m_.is_quadratic()) return m_.shift;
    return std::nullopt;
  }
  std::optional<FullMatrix> majorizer_shift(const FullMatrix& f) const override {
    if (m_.kind != DensityKind::double_well) return std::nullopt;
    return (f - m_.shift).squaredNorm() <= (f + m_.shift).squaredNorm() ? m_.shift
                                                                         : FullMatrix(-m_.shift);
  }

 private:
  DensityModel m_;
};

// Closed-form QW_0 = W_0 for kinds with convex W_0. The third column of F is
// zero on planar grids and does not enter.
class ConvexLimitDensity final : public BulkDensity {
 public:
  explicit ConvexLimitDensity(DensityModel m) : m_(std::move(m)), w0_(make_w0(m_)) {}
  double value(const FullMatrix& f) const override { return w0_(planar_part(f)); }
  FullMatrix gradient(const FullMatrix& f) const override {
    FullMatrix g = FullMatrix::Zero();
    g.leftCols<2>() = w0_.grad(planar_part(f));
    return g;
  }
  bool has_hessian() const override { return m_.kind == DensityKind::p_power; }
  Hessian9 hessian(const FullMatrix& f) const override {
    // W_0(xibar) = W(xibar | m3); only the in-plane block is meaningful.
    Hessian9 h = hess_w(m_, join_columns(planar_part(f), m_.shift.col(2)));
    h.bottomRows<3>().setZero();
    h.rightCols<3>().setZero();
    return h;
  }
  std::optional<FullMatrix> quadratic_shift() const override {
    if (!m_.is_quadratic()) return std::nullopt;
    FullMatrix s = m_.shift;
    s.col(2).setZero();
    return s;
  }

 private:
  DensityModel m_;
  PlanarDensity w0_;
};

class TableLimitDensity final : public BulkDensity {
 public:
  explicit TableLimitDensity(std::shared_ptr<const EnvelopeTable> t) : t_(std::move(t)) {}
  double value(const FullMatrix& f) const override { return t_->value(planar_part(f)); }
  FullMatrix gradient(const FullMatrix& f) const override {
    FullMatrix g = FullMatrix::Zero();
    g.leftCols<2>() = t_->gradient(planar_part(f));
    return g;
  }

 private:
  std::shared_ptr<const EnvelopeTable> t_;
};

}  // namespace

BulkDensityPtr make_bulk_density(const DensityModel& model) {
  model.validate();
  return std::make_shared<ModelDensity>(model);
}

BulkDensityPtr make_limit_density(const DensityModel& model,
                                  std::shared_ptr<const EnvelopeTable> table) {
  model.validate();
  if (table) return std::make_shared<TableLimitDensity>(std::move(table));
  if (!model.has_convex_relaxation())
    throw ConfigError(fmt::format("{} needs an envelope table for the 2D model", model.name));
  return std::make_shared<ConvexLimitDensity>(model);
}

void PhaseParams::validate() const {
  if (!(ell > 0.0)) throw ConfigError("phase ell must be positive");
  if (!(toughness > 0.0)) throw ConfigError("phase toughness must be positive");
  if (eta >= 0.0 && !std::isfinite(eta)) throw ConfigError("phase eta must be finite");
}

void check_phase_range(const Field& v) {
  if (v.components != 1) throw DomainError("phase field must be scalar");
  for (Eigen::Index k = 0; k < v.values.size(); ++k) {
    const double x = v.values[k];
    if (!(x >= -1e-12 && x <= 1.0 + 1e-12))
      throw DomainError(fmt::format("phase value {} at node {} outside [0, 1]", x, k));
  }
}

namespace {

double inverse_eps(const Grid& g, double eps) {
  if (g.planar()) return 1.0;
  if (!(eps > 0.0)) throw DomainError(fmt::format("thickness eps must be positive (got {})", eps));
  return 1.0 / eps;
}

}  // namespace

std::vector<FullMatrix> scaled_gradient(const Field& u, double eps) {
  if (u.components != 3) throw DomainError("scaled_gradient needs a 3-component field");
  const double ie = inverse_eps(u.grid, eps);
  const CellKernel k(u.grid, Quadrature::midpoint);
  std::vector<FullMatrix> out(u.grid.cell_count());
  for (int c = 0; c < u.grid.cell_count(); ++c)
    out[c] = scaled_gradient_at(u.values, k.cell_nodes(c), k.nodes_per_cell(), k.points()[0], ie);
  return out;
}

double at_bulk_energy(const Field& u, const Field& v, double eps, const BulkDensity& w,
                      const PhaseParams& pp) {
  if (u.components != 3) throw DomainError("bulk energy needs a 3-component deformation");
  if (!(u.grid == v.grid)) throw DomainError("u and v live on different grids");
  check_phase_range(v);
  const double ie = inverse_eps(u.grid, eps);
  const double eta = pp.eta_value();
  const CellKernel k(u.grid, Quadrature::gauss);
  double total = 0.0;
  for (int c = 0; c < u.grid.cell_count(); ++c) {
    if (!u.grid.cell_in_omega(c)) continue;
    const auto nodes = k.cell_nodes(c);
    for (const auto& q : k.points()) {
      const double vq = value_at(v.values, nodes, k.nodes_per_cell(), q);
      const FullMatrix f = scaled_gradient_at(u.values, nodes, k.nodes_per_cell(), q, ie);
      total += q.weight * (vq * vq + eta) * w.value(f);
    }
  }
  return total;
}

double at_bulk_energy(const Field& u, const Field& v, double eps, const DensityModel& model,
                      const PhaseParams& pp) {
  const auto w = u.grid.planar() ? make_limit_density(model) : make_bulk_density(model);
  return at_bulk_energy(u, v, eps, *w, pp);
}

SurfaceParts at_surface_parts(const Field& v, double eps, const PhaseParams& pp) {
  check_phase_range(v);
  const double ie = inverse_eps(v.grid, eps);
  const double gc = pp.surface_toughness(v.grid), ell = pp.ell;
  const CellKernel k(v.grid, Quadrature::gauss);
  SurfaceParts s;
  for (int c = 0; c < v.grid.cell_count(); ++c) {
    const auto nodes = k.cell_nodes(c);
    for (const auto& q : k.points()) {
      const double vq = value_at(v.values, nodes, k.nodes_per_cell(), q);
      const Vec3 g = scalar_gradient_at(v.values, nodes, k.nodes_per_cell(), q, ie);
      s.inplane += q.weight * gc * ell * (g[0] * g[0] + g[1] * g[1]);
      s.transverse += q.weight * gc * ell * g[2] * g[2];
      s.potential += q.weight * gc * (1.0 - vq) * (1.0 - vq) / (4.0 * ell);
    }
  }
  return s;
}

double at_surface_energy(const Field& v, double eps, const PhaseParams& pp) {
  return at_surface_parts(v, eps, pp).total();
}

double sharp_surface_energy(const std::vector<Facet>& facets, double eps) {
  if (!(eps > 0.0)) throw DomainError("sharp surface energy needs eps > 0");
  double total = 0.0;
  for (const auto& f : facets) {
    if (!(f.area >= 0.0)) throw DomainError("facet area must be non-negative");
    if (std::abs(f.normal.norm() - 1.0) > 1e-9) throw DomainError("facet normal is not unit");
    // Purely transverse facets take the division route so area / eps comes out exact.
    if (f.normal[0] == 0.0 && f.normal[1] == 0.0)
      total += f.area * std::abs(f.normal[2]) / eps;
    else
      total += f.area * std::hypot(f.normal[0], f.normal[1], f.normal[2] / eps);
  }
  return total;
}

// rho' is piecewise linear on [a, b], b = e a: it falls from 1 to -s over
// t1 (b - a), stays at -s, and climbs back to 0 over t2 (b - a). t2 is fixed by
// rho(b) = 0, i.e. the integral of rho' over [a, b] equals -a.
namespace {

constexpr double kSlope = 0.9;
constexpr double kRise = 0.1;

struct Blend {
  double a, len, t1, t2, mid;
};

Blend blend(int i) {
  Blend b;
  b.a = std::exp(static_cast<double>(i));
  b.len = (std::exp(1.0) - 1.0) * b.a;
  const double s = kSlope, t1 = kRise;
  b.t1 = t1;
  b.t2 = (2.0 / s) * (-b.a / b.len - t1 * (1.0 - s) / 2.0 + s * (1.0 - t1));
  b.mid = 1.0 - b.t1 - b.t2;
  return b;
}

}  // namespace

double truncation_profile(double r, int i) {
  if (i < 0) throw DomainError("truncation index must be >= 0");
  const Blend b = blend(i);
  if (r <= b.a) return r;
  if (r >= b.a + b.len) return 0.0;
  const double s = kSlope;
  const double x = (r - b.a) / b.len;  // in (0, 1)
  double rho = b.a;
  // Segment 1: rho' = 1 - (1 + s) x / t1.
  const double x1 = std::min(x, b.t1);
  rho += b.len * (x1 - (1.0 + s) * x1 * x1 / (2.0 * b.t1));
  if (x <= b.t1) return rho;
  // Segment 2: rho' = -s.
  const double x2 = std::min(x, b.t1 + b.mid) - b.t1;
  rho -= b.len * s * x2;
  if (x <= b.t1 + b.mid) return rho;
  // Segment 3: rho' = -s (1 - y / t2), y measured from the segment start.
  const double y = x - b.t1 - b.mid;
  rho -= b.len * s * (y - y * y / (2.0 * b.t2));
  return std::max(rho, 0.0);
}

Vec3 truncation_map(const Vec3& z, int i) {
  const double r = z.norm();
  if (r <= std::exp(static_cast<double>(i))) return z;
  return (truncation_profile(r, i) / r) * z;
}

Field truncate(const Field& u, int i) {
  if (i < 0) throw DomainError("truncation index must be >= 0");
  Field out = u;
  const int n = u.grid.node_count();
  for (int node = 0; node < n; ++node) {
    if (u.components == 3) {
      out.set_vec(node, truncation_map(u.vec(node), i));
    } else {
      const double x = u.at(node);
      out.at(node) = std::copysign(truncation_profile(std::abs(x), i), x);
    }
  }
  return out;
}

}  // namespace lamella

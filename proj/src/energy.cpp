#include "lamella/energy.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <random>

#include <fmt/format.h>

#include "lamella/errors.hpp"

namespace lamella {

namespace {

void require_finite(const FullMatrix& xi, const char* where) {
  if (!xi.allFinite()) throw DomainError(fmt::format("{}: non-finite matrix entry", where));
}

// Index of F(i, a) in column-major vec(F).
constexpr int vec_index(int row, int col) { return row + 3 * col; }

// Double-well branch selection; ties go to the first branch (+A).
bool first_well_active(const FullMatrix& xi, const FullMatrix& well) {
  return (xi - well).squaredNorm() <= (xi + well).squaredNorm();
}

}  // namespace

std::string_view to_string(DensityKind kind) {
  switch (kind) {
    case DensityKind::quadratic_isotropic: return "quadratic-isotropic";
    case DensityKind::quadratic_shifted: return "quadratic-shifted";
    case DensityKind::double_well: return "double-well";
    case DensityKind::p_power: return "p-power";
  }
  return "unknown";
}

DensityKind density_kind_from_string(std::string_view name) {
  for (auto kind : {DensityKind::quadratic_isotropic, DensityKind::quadratic_shifted,
                    DensityKind::double_well, DensityKind::p_power}) {
    if (to_string(kind) == name) return kind;
  }
  throw ConfigError(fmt::format("unknown density kind '{}'", name));
}

std::string_view to_string(EnvelopeMethod method) {
  switch (method) {
    case EnvelopeMethod::closed_form: return "closed-form";
    case EnvelopeMethod::lamination: return "lamination";
    case EnvelopeMethod::cell_problem: return "cell-problem";
  }
  return "unknown";
}

EnvelopeMethod envelope_method_from_string(std::string_view name) {
  for (auto method :
       {EnvelopeMethod::closed_form, EnvelopeMethod::lamination, EnvelopeMethod::cell_problem}) {
    if (to_string(method) == name) return method;
  }
  throw ConfigError(fmt::format("unknown envelope method '{}'", name));
}

DensityModel DensityModel::quadratic_isotropic() {
  DensityModel m;
  m.name = "quadratic-isotropic";
  m.kind = DensityKind::quadratic_isotropic;
  m.beta = default_beta(m);
  m.beta_prime = default_beta_prime(m);
  return m;
}

DensityModel DensityModel::quadratic_shifted(const FullMatrix& shift) {
  DensityModel m;
  m.name = "quadratic-shifted";
  m.kind = DensityKind::quadratic_shifted;
  m.shift = shift;
  m.beta = default_beta(m);
  m.beta_prime = default_beta_prime(m);
  return m;
}

DensityModel DensityModel::double_well(const FullMatrix& well) {
  DensityModel m;
  m.name = "double-well";
  m.kind = DensityKind::double_well;
  m.shift = well;
  m.beta = default_beta(m);
  m.beta_prime = default_beta_prime(m);
  return m;
}

DensityModel DensityModel::p_power(double p, double kappa, const FullMatrix& shift) {
  DensityModel m;
  m.name = "p-power";
  m.kind = DensityKind::p_power;
  m.p = p;
  m.kappa = kappa;
  m.shift = shift;
  m.beta = default_beta(m);
  m.beta_prime = default_beta_prime(m);
  return m;
}

void DensityModel::validate() const {
  if (!shift.allFinite()) throw ConfigError("density parameters must be finite");
  if (is_quadratic() || kind == DensityKind::double_well) {
    if (p != 2.0) throw ConfigError(fmt::format("{} requires p = 2", to_string(kind)));
  }
  if (kind == DensityKind::quadratic_isotropic && !shift.isZero(0.0))
    throw ConfigError("quadratic-isotropic takes no shift");
  if (kind == DensityKind::double_well && shift.isZero(0.0))
    throw ConfigError("double-well requires a non-zero well");
  if (kind == DensityKind::p_power) {
    if (!(p > 1.0)) throw ConfigError("p-power requires p > 1");
    if (!(kappa >= 0.0)) throw ConfigError("p-power requires kappa >= 0");
    if (p < 2.0 && !(kappa > 0.0)) throw ConfigError("p-power with p < 2 requires kappa > 0");
  }
  if (!(beta > 0.0) || !(beta_prime > 0.0)) throw ConfigError("growth constants must be positive");
}

double default_beta(const DensityModel& model) {
  const double m2 = model.shift.squaredNorm();
  switch (model.kind) {
    case DensityKind::quadratic_isotropic: return 1.0;
    case DensityKind::quadratic_shifted:
    case DensityKind::double_well: return std::max(2.0, 2.0 * m2);
    case DensityKind::p_power: return std::pow(4.0 * (1.0 + model.kappa + m2), model.p / 2.0);
  }
  return 1.0;
}

double default_beta_prime(const DensityModel& model) {
  const double m = model.shift.norm();
  switch (model.kind) {
    case DensityKind::quadratic_isotropic: return 2.0;
    case DensityKind::quadratic_shifted:
    case DensityKind::double_well: return 2.0 * std::max(1.0, m);
    case DensityKind::p_power:
      return model.p * std::pow(4.0 * (1.0 + model.kappa + m * m), (model.p - 1.0) / 2.0);
  }
  return 2.0;
}

double eval_w(const DensityModel& model, const FullMatrix& xi) {
  require_finite(xi, "eval_w");
  switch (model.kind) {
    case DensityKind::quadratic_isotropic: return xi.squaredNorm();
    case DensityKind::quadratic_shifted: return (xi - model.shift).squaredNorm();
    case DensityKind::double_well:
      return std::min((xi - model.shift).squaredNorm(), (xi + model.shift).squaredNorm());
    case DensityKind::p_power:
      return std::pow(model.kappa + (xi - model.shift).squaredNorm(), model.p / 2.0);
  }
  return 0.0;
}

FullMatrix grad_w(const DensityModel& model, const FullMatrix& xi) {
  require_finite(xi, "grad_w");
  switch (model.kind) {
    case DensityKind::quadratic_isotropic: return 2.0 * xi;
    case DensityKind::quadratic_shifted: return 2.0 * (xi - model.shift);
    case DensityKind::double_well:
      return first_well_active(xi, model.shift) ? FullMatrix(2.0 * (xi - model.shift))
                                                : FullMatrix(2.0 * (xi + model.shift));
    case DensityKind::p_power: {
      const FullMatrix d = xi - model.shift;
      const double s = model.kappa + d.squaredNorm();
      if (s == 0.0) return FullMatrix::Zero();
      return model.p * std::pow(s, model.p / 2.0 - 1.0) * d;
    }
  }
  return FullMatrix::Zero();
}

Hessian9 hess_w(const DensityModel& model, const FullMatrix& xi) {
  require_finite(xi, "hess_w");
  if (model.kind != DensityKind::p_power) return 2.0 * Hessian9::Identity();
  const FullMatrix d = xi - model.shift;
  const double s = model.kappa + d.squaredNorm();
  if (s == 0.0) return Hessian9::Zero();
  const Eigen::Map<const Eigen::Matrix<double, 9, 1>> dv(d.data());
  const double p = model.p;
  return p * std::pow(s, p / 2.0 - 1.0) * Hessian9::Identity() +
         p * (p - 2.0) * std::pow(s, p / 2.0 - 2.0) * (dv * dv.transpose());
}

GrowthAudit audit_growth(const DensityModel& model, int samples, std::uint64_t seed,
                         double fd_tolerance) {
  GrowthAudit audit;
  audit.lower_slack = std::numeric_limits<double>::infinity();
  audit.upper_slack = std::numeric_limits<double>::infinity();
  audit.derivative_slack = std::numeric_limits<double>::infinity();

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> log_scale(-2.0, 2.0);

  const double p = model.p;
  int taken = 0;
  int attempts = 0;
  while (taken < samples && attempts < 20 * samples + 20) {
    ++attempts;
    FullMatrix xi;
    if (attempts == 1) {
      xi.setZero();
    } else {
      for (int k = 0; k < 9; ++k) xi(k) = normal(rng);
      xi *= std::pow(10.0, log_scale(rng)) / xi.norm();
    }
    const double step = 1e-5 * std::max(1.0, xi.norm());
    if (model.kind == DensityKind::double_well) {
      // The central-difference stencil must not straddle the branch switch.
      const double gap =
          std::abs((xi - model.shift).squaredNorm() - (xi + model.shift).squaredNorm());
      if (gap < 100.0 * step * (4.0 * model.shift.norm())) continue;
    }
    ++taken;

    const double w = eval_w(model, xi);
    const double r = xi.norm();
    audit.lower_slack = std::min(audit.lower_slack, w - (std::pow(r, p) / model.beta - model.beta));
    audit.upper_slack = std::min(audit.upper_slack, model.beta * (1.0 + std::pow(r, p)) - w);
    const FullMatrix g = grad_w(model, xi);
    audit.derivative_slack = std::min(
        audit.derivative_slack, model.beta_prime * (1.0 + std::pow(r, p - 1.0)) - g.norm());

    FullMatrix fd;
    for (int k = 0; k < 9; ++k) {
      FullMatrix plus = xi, minus = xi;
      plus(k) += step;
      minus(k) -= step;
      fd(k) = (eval_w(model, plus) - eval_w(model, minus)) / (2.0 * step);
    }
    audit.max_fd_error = std::max(audit.max_fd_error, (fd - g).norm() / (1.0 + g.norm()));
  }
  audit.samples = taken;
  audit.passed = taken == samples && audit.lower_slack >= 0.0 && audit.upper_slack >= 0.0 &&
                 audit.derivative_slack >= 0.0 && audit.max_fd_error <= fd_tolerance;
  return audit;
}

namespace {

struct TransverseObjective {
  const DensityModel& model;
  const PlanarMatrix& xibar;

  double value(const Vec3& z) const { return eval_w(model, join_columns(xibar, z)); }
  Vec3 gradient(const Vec3& z) const { return grad_w(model, join_columns(xibar, z)).col(2); }
  Eigen::Matrix3d hessian(const Vec3& z) const {
    const Hessian9 h = hess_w(model, join_columns(xibar, z));
    Eigen::Matrix3d out;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) out(i, j) = h(vec_index(i, 2), vec_index(j, 2));
    return out;
  }
};

struct NewtonResult {
  Vec3 z;
  double value;
  bool converged;
};

NewtonResult damped_newton(const TransverseObjective& obj, Vec3 z) {
  constexpr double kGradTol = 1e-10;
  constexpr int kMaxIter = 100;
  double f = obj.value(z);
  for (int it = 0; it < kMaxIter; ++it) {
    const Vec3 g = obj.gradient(z);
    if (g.norm() <= kGradTol) return {z, f, true};
    Vec3 dir;
    Eigen::LLT<Eigen::Matrix3d> llt(obj.hessian(z));
    if (llt.info() == Eigen::Success) {
      dir = -llt.solve(g);
    } else {
      dir = -g;
    }
    if (dir.dot(g) >= 0.0) dir = -g;
    double step = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      const Vec3 trial = z + step * dir;
      const double ft = obj.value(trial);
      if (ft <= f + 1e-4 * step * g.dot(dir)) {
        z = trial;
        f = ft;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      // No descent left at machine precision.
      return {z, f, obj.gradient(z).norm() <= 1e-6 * (1.0 + std::abs(f))};
    }
  }
  return {z, f, obj.gradient(z).norm() <= kGradTol};
}

}  // namespace

EnvelopeEstimate relax_transverse(const DensityModel& model, const PlanarMatrix& xibar) {
  if (!xibar.allFinite()) throw DomainError("relax_transverse: non-finite matrix entry");
  EnvelopeEstimate out;
  out.method = EnvelopeMethod::closed_form;
  switch (model.kind) {
    case DensityKind::quadratic_isotropic:
      out.value = xibar.squaredNorm();
      out.argmin_z = Vec3::Zero();
      return out;
    case DensityKind::quadratic_shifted:
      out.value = (xibar - model.shift.leftCols<2>()).squaredNorm();
      out.argmin_z = model.shift.col(2);
      return out;
    default: break;
  }

  const TransverseObjective obj{model, xibar};
  const double scale = 1.0 + model.shift.col(2).norm();
  std::array<double, 3> offsets{-scale, 0.0, scale};
  std::optional<NewtonResult> best;
  double best_unconverged = std::numeric_limits<double>::infinity();
  for (double a : offsets)
    for (double b : offsets)
      for (double c : offsets) {
        const NewtonResult r = damped_newton(obj, Vec3(a, b, c));
        if (!r.converged) {
          best_unconverged = std::min(best_unconverged, r.value);
          continue;
        }
        if (!best || r.value < best->value) best = r;
      }
  if (!best) {
    throw NumericalError("relax_transverse: Newton did not converge from any start",
                         best_unconverged);
  }
  out.value = best->value;
  out.argmin_z = best->z;
  out.method = EnvelopeMethod::closed_form;
  return out;
}

PlanarMatrix grad_w0(const DensityModel& model, const PlanarMatrix& xibar) {
  const EnvelopeEstimate e = relax_transverse(model, xibar);
  return grad_w(model, join_columns(xibar, *e.argmin_z)).leftCols<2>();
}

}  // namespace lamella

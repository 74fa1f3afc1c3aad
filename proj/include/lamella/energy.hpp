#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "lamella/types.hpp"

namespace lamella {

enum class DensityKind { quadratic_isotropic, quadratic_shifted, double_well, p_power };

std::string_view to_string(DensityKind kind);
DensityKind density_kind_from_string(std::string_view name);

/// Stored-energy density W on 3x3 matrices with p-growth constants.
///
/// Kinds:
///   quadratic-isotropic  W(F) = |F|^2
///   quadratic-shifted    W(F) = |F - M|^2
///   double-well          W(F) = min(|F - A|^2, |F + A|^2), first branch on ties
///   p-power              W(F) = (kappa + |F - M|^2)^(p/2)
///
/// `shift` stores M (shifted, p-power) or the well A (double-well).
/// `beta` and `beta_prime` are the growth constants of
///   (1/beta)|F|^p - beta <= W(F) <= beta (1 + |F|^p)
///   |dW(F)| <= beta_prime (1 + |F|^(p-1)).
struct DensityModel {
  std::string name;
  DensityKind kind = DensityKind::quadratic_isotropic;
  double p = 2.0;
  double beta = 1.0;
  double beta_prime = 2.0;
  FullMatrix shift = FullMatrix::Zero();
  double kappa = 0.0;

  static DensityModel quadratic_isotropic();
  static DensityModel quadratic_shifted(const FullMatrix& m);
  static DensityModel double_well(const FullMatrix& well);
  static DensityModel p_power(double p, double kappa, const FullMatrix& m = FullMatrix::Zero());

  /// Throws ConfigError when parameters do not fit the kind.
  void validate() const;

  bool is_quadratic() const {
    return kind == DensityKind::quadratic_isotropic || kind == DensityKind::quadratic_shifted;
  }
  /// W_0 is convex for every kind except the double well, so QW_0 = W_0 there.
  bool has_convex_relaxation() const { return kind != DensityKind::double_well; }
};

/// Growth constants implied by the parameters (used when the config gives none).
double default_beta(const DensityModel& model);
double default_beta_prime(const DensityModel& model);

double eval_w(const DensityModel& model, const FullMatrix& xi);
FullMatrix grad_w(const DensityModel& model, const FullMatrix& xi);
Hessian9 hess_w(const DensityModel& model, const FullMatrix& xi);

struct GrowthAudit {
  bool passed = true;
  int samples = 0;
  double lower_slack = 0.0;       ///< min of W - ((1/beta)|F|^p - beta)
  double upper_slack = 0.0;       ///< min of beta (1 + |F|^p) - W
  double derivative_slack = 0.0;  ///< min of beta' (1 + |F|^(p-1)) - |dW|
  double max_fd_error = 0.0;      ///< max |dW - central difference| / (1 + |dW|)
};

/// Checks the growth bounds and dW against central differences on a random sample.
GrowthAudit audit_growth(const DensityModel& model, int samples, std::uint64_t seed,
                         double fd_tolerance = 1e-6);

enum class EnvelopeMethod { closed_form, lamination, cell_problem };

std::string_view to_string(EnvelopeMethod method);
EnvelopeMethod envelope_method_from_string(std::string_view name);

struct EnvelopeEstimate {
  double value = 0.0;
  EnvelopeMethod method = EnvelopeMethod::closed_form;
  int resolution = 0;  ///< lamination depth or cell mesh size
  std::optional<Vec3> argmin_z;
};

/// W_0(xibar) = inf_z W(xibar | z). Closed form for the quadratic kinds; damped
/// Newton from a 3^3 grid of starts otherwise.
EnvelopeEstimate relax_transverse(const DensityModel& model, const PlanarMatrix& xibar);

/// dW_0(xibar): the in-plane block of dW at the minimizing z.
PlanarMatrix grad_w0(const DensityModel& model, const PlanarMatrix& xibar);

}  // namespace lamella

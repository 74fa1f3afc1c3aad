#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "lamella/phase_field.hpp"

namespace lamella {

/// Boundary deformation on omega' x I:
///   g(t, x) = t (load x_alpha + amplitude sin(pi x1 / lx) sin(pi x2 / ly) direction)
///             + eps (x3 + 1) t H
/// The last term is absent on planar grids; its scaled x3-derivative is t H.
struct BoundaryProgram {
  PlanarMatrix load = PlanarMatrix::Zero();
  double amplitude = 0.0;
  Vec3 direction = Vec3::Zero();
  Vec3 transverse = Vec3::Zero();  ///< H
  double final_time = 1.0;
  int steps = 1;
  std::optional<double> sup_u_bound;

  void validate() const;  ///< throws ConfigError
  std::vector<double> times() const;
  Vec3 datum(const Vec3& x, double t, double eps, bool planar, const Grid& g) const;
  Vec3 rate(const Vec3& x, double t, double eps, bool planar, const Grid& g) const;
  Field datum_field(const Grid& g, double t, double eps) const;
  Field rate_field(const Grid& g, double t, double eps) const;
  bool is_zero() const;
};

/// A planar crack nucleus: the plane {x_axis = position}.
struct CrackSeed {
  int axis = 0;
  double position = 0.5;
};

/// v(x) = 1 - exp(-d / L) with d the distance to the seed plane; L = 2 ell for
/// vertical planes and 2 ell / eps for the horizontal one (transverse weight).
Field seed_profile(const Grid& grid, const CrackSeed& seed, double ell, double eps);

struct AltMinOptions {
  double tol_alt = 1e-8;     ///< stop when the sweep decrease is below tol_alt |E|
  int max_sweeps = 200;
  double tol_inner = 1e-12;  ///< relative tolerance of the nonlinear u-step
  int max_inner = 200;
  bool multistart = false;   ///< also try every seed at every step
  std::vector<CrackSeed> seeds;
};

struct EvolutionProblem {
  Grid grid;
  double eps = 0.0;  ///< 0 on planar grids (relaxed 2D model)
  BulkDensityPtr density;
  PhaseParams phase;
  BoundaryProgram program;
  AltMinOptions options;

  void validate() const;
};

struct EvolutionState {
  Field u;
  Field v;
  double t = 0.0;
};

struct StepEnergies {
  double bulk = 0.0;
  double surface = 0.0;
  double total() const { return bulk + surface; }
};

StepEnergies evaluate_energies(const EvolutionProblem& pb, const EvolutionState& s);

struct StepResult {
  EvolutionState state;
  StepEnergies energies;
  int sweeps = 0;
  int start = -1;  ///< -1 warm start, otherwise the winning seed index
};

/// Initial state at t: u = g(t) everywhere, v = 1.
EvolutionState initial_state(const EvolutionProblem& pb, double t);

/// Alternate minimization at time t with frame datum g(t) and 0 <= v <= prev_v.
StepResult minimize_at_step(const EvolutionProblem& pb, const EvolutionState& guess, double t,
                            const Field& prev_v);

/// theta = int (v^2 + eta) dW(scaled grad u) . (scaled grad gdot).
double work_rate(const EvolutionProblem& pb, const EvolutionState& s, const Field& gdot);

struct TraceRow {
  double t = 0.0;
  double bulk = 0.0;
  double surface = 0.0;
  double total = 0.0;
  double work_inc = 0.0;
  double work_cum = 0.0;
  double residual = 0.0;
  int alt_iters = 0;
  double sup_u = 0.0;
};

struct EvolutionTrace {
  std::vector<TraceRow> rows;
  std::vector<Field> v_checkpoints;
  EvolutionState final_state;

  void write_csv(const std::filesystem::path& path) const;
};

EvolutionTrace run_evolution(const EvolutionProblem& pb);

struct StabilityReport {
  bool passed = true;
  double energy = 0.0;
  double min_gap = 0.0;
  int competitors = 0;
  std::string worst;  ///< description of the worst competitor
};

StabilityReport stability_check(const EvolutionProblem& pb, const EvolutionState& s,
                                int n_competitors, std::uint64_t seed, double tol_rel = 1e-6);

}  // namespace lamella

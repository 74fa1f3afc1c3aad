#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "lamella/evolve.hpp"

namespace lamella {

class EnvelopeTable;

/// Max over in-plane node columns of (max - min) of v along x3. 0 iff v is x3-invariant.
double x3_invariance(const Field& v);

/// Share of the phase-field surface energy carried by transverse derivatives of v.
double horizontal_fraction(const Field& v, double eps, const PhaseParams& pp);

/// Bulk + surface energy restricted to each of n_slabs transverse slabs.
std::vector<double> slab_energies(const EvolutionProblem& pb, const EvolutionState& s, int n_slabs);

struct SliceSelection {
  int index = 0;
  double energy = 0.0;
};

/// Argmin of the slab energies, lowest index on ties.
SliceSelection select_slice(const std::vector<double>& energies);
SliceSelection select_slice(const EvolutionProblem& pb, const EvolutionState& s, int n_slabs);

/// int (v^2 + eta) dW(scaled grad u) . psi, psi constant per cell (3D), or the
/// same with the relaxed stress (dQW_0 | 0) on planar grids.
double stress_pairing(const EvolutionProblem& pb, const EvolutionState& s,
                      const std::vector<FullMatrix>& psi);

/// x3-independent test field psi(x) = c + d sin(pi x1 / lx) sin(pi x2 / ly),
/// sampled at cell centers.
struct TestField {
  FullMatrix c = FullMatrix::Zero();
  FullMatrix d = FullMatrix::Zero();

  std::vector<FullMatrix> sample(const Grid& g) const;
  /// c = 0, d with i.i.d. standard normal entries; vanishes on the boundary of omega.
  static TestField random(std::uint64_t seed);
};

struct MonotonicityViolation {
  int member = 0;
  int checkpoint = 0;  ///< index k of the pair (k - 1, k)
  int node = 0;
  double increase = 0.0;
};

/// Every place where some v grows between consecutive checkpoints.
std::vector<MonotonicityViolation> crack_monotonicity_audit(
    const std::vector<std::vector<Field>>& members);

struct SweepConfig {
  DensityModel model;
  Grid grid;  ///< 3D grid; the limit run uses the same in-plane grid with nz = 1
  PhaseParams phase;
  BoundaryProgram program;
  AltMinOptions options;
  std::vector<double> eps_list;
  std::shared_ptr<const EnvelopeTable> table;
  std::vector<TestField> test_fields;
  int jobs = 1;

  void validate() const;
};

struct SweepMember {
  double eps = 0.0;
  std::optional<EvolutionTrace> trace;
  std::string error;
  std::vector<double> pairings;
  double x3_inv = 0.0;
  double horizontal_fraction = 0.0;
};

struct MetricRow {
  double t, eps, bulk_gap, surface_gap, total_gap, x3_inv;
};

struct SweepReport {
  std::vector<double> eps_list;
  std::vector<SweepMember> members;
  std::optional<EvolutionTrace> limit;
  std::vector<double> limit_pairings;
  std::vector<MetricRow> metrics;
  bool partial = false;

  /// Terminal gaps per member (NaN for failed members).
  std::vector<double> terminal_bulk_gaps() const;
  std::vector<double> terminal_surface_gaps() const;
  std::vector<double> terminal_total_gaps() const;
  std::vector<std::vector<double>> pairing_gaps() const;  ///< [member][field]
};

SweepReport run_sweep(const SweepConfig& cfg);

}  // namespace lamella

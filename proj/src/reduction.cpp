#include "lamella/reduction.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <thread>

#include <fmt/format.h>

#include "lamella/errors.hpp"
#include "lamella/log.hpp"
#include "lamella/table.hpp"

namespace lamella {

double x3_invariance(const Field& v) {
  const Grid& g = v.grid;
  if (g.planar()) throw DomainError("x3 invariance needs a 3D grid");
  double worst = 0.0;
  for (int j = 0; j < g.nodes_y(); ++j)
    for (int i = 0; i < g.nodes_x(); ++i) {
      double lo = std::numeric_limits<double>::infinity(), hi = -lo;
      for (int k = 0; k < g.nodes_z(); ++k) {
        const double x = v.at(g.node(i, j, k));
        lo = std::min(lo, x);
        hi = std::max(hi, x);
      }
      worst = std::max(worst, hi - lo);
    }
  return worst;
}

double horizontal_fraction(const Field& v, double eps, const PhaseParams& pp) {
  const SurfaceParts s = at_surface_parts(v, eps, pp);
  return s.total() > 0.0 ? s.transverse / s.total() : 0.0;
}

std::vector<double> slab_energies(const EvolutionProblem& pb, const EvolutionState& s, int n_slabs) {
  const Grid& g = pb.grid;
  if (g.planar()) throw DomainError("slab selection needs a 3D grid");
  if (n_slabs < 1 || g.nz % n_slabs != 0)
    throw ConfigError(fmt::format("{} slabs do not divide {} transverse cells", n_slabs, g.nz));
  const int per_slab = g.nz / n_slabs;
  const CellKernel k(g, Quadrature::gauss);
  const double ie = 1.0 / pb.eps;
  const double eta = pb.phase.eta_value();
  const auto& pp = pb.phase;
  std::vector<double> out(n_slabs, 0.0);
  for (int c = 0; c < g.cell_count(); ++c) {
    int ci, cj, ck;
    g.cell_ijk(c, ci, cj, ck);
    const auto nodes = k.cell_nodes(c);
    double e = 0.0;
    for (const auto& q : k.points()) {
      const double vq = pp.enabled ? value_at(s.v.values, nodes, 8, q) : 1.0;
      if (g.cell_in_omega(c))
        e += q.weight * (vq * vq + eta) *
             pb.density->value(scaled_gradient_at(s.u.values, nodes, 8, q, ie));
      if (pp.enabled) {
        const Vec3 gv = scalar_gradient_at(s.v.values, nodes, 8, q, ie);
        e += q.weight * pp.surface_toughness(g) *
             (pp.ell * gv.squaredNorm() + (1.0 - vq) * (1.0 - vq) / (4.0 * pp.ell));
      }
    }
    out[ck / per_slab] += e;
  }
  return out;
}

SliceSelection select_slice(const std::vector<double>& energies) {
  if (energies.empty()) throw ConfigError("slice selection needs at least one slab");
  SliceSelection best{0, energies[0]};
  for (int i = 1; i < static_cast<int>(energies.size()); ++i)
    if (energies[i] < best.energy) best = {i, energies[i]};
  return best;
}

SliceSelection select_slice(const EvolutionProblem& pb, const EvolutionState& s, int n_slabs) {
  return select_slice(slab_energies(pb, s, n_slabs));
}

double stress_pairing(const EvolutionProblem& pb, const EvolutionState& s,
                      const std::vector<FullMatrix>& psi) {
  const Grid& g = pb.grid;
  if (static_cast<int>(psi.size()) != g.cell_count())
    throw DomainError("test field must have one matrix per cell");
  const CellKernel k(g, Quadrature::gauss);
  const int per = k.nodes_per_cell();
  const double ie = g.planar() ? 1.0 : 1.0 / pb.eps;
  const double eta = pb.phase.eta_value();
  double total = 0.0;
  for (int c = 0; c < g.cell_count(); ++c) {
    if (!g.cell_in_omega(c)) continue;
    const auto nodes = k.cell_nodes(c);
    for (const auto& q : k.points()) {
      const double vq = pb.phase.enabled ? value_at(s.v.values, nodes, per, q) : 1.0;
      const FullMatrix stress = pb.density->gradient(scaled_gradient_at(s.u.values, nodes, per, q, ie));
      total += q.weight * (vq * vq + eta) * (stress.array() * psi[c].array()).sum();
    }
  }
  return total;
}

std::vector<FullMatrix> TestField::sample(const Grid& g) const {
  std::vector<FullMatrix> out(g.cell_count());
  for (int cell = 0; cell < g.cell_count(); ++cell) {
    int i, j, kk;
    g.cell_ijk(cell, i, j, kk);
    const double x1 = (i + 0.5 - g.pad_left()) * g.hx();
    const double x2 = (j + 0.5 - g.pad_bottom()) * g.hy();
    out[cell] = c + std::sin(M_PI * x1 / g.lx) * std::sin(M_PI * x2 / g.ly) * d;
  }
  return out;
}

TestField TestField::random(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  // No constant part: a constant third column would pair with the frame
  // boundary layer, which a fixed mesh cannot resolve once eps < h.
  TestField f;
  for (int k = 0; k < 9; ++k) f.d(k) = normal(rng);
  return f;
}

std::vector<MonotonicityViolation> crack_monotonicity_audit(
    const std::vector<std::vector<Field>>& members) {
  std::vector<MonotonicityViolation> out;
  for (int m = 0; m < static_cast<int>(members.size()); ++m) {
    const auto& cps = members[m];
    for (int k = 1; k < static_cast<int>(cps.size()); ++k) {
      const auto& a = cps[k - 1].values;
      const auto& b = cps[k].values;
      if (a.size() != b.size()) throw DomainError("checkpoints live on different grids");
      for (Eigen::Index n = 0; n < a.size(); ++n)
        if (b[n] > a[n]) out.push_back({m, k, static_cast<int>(n), b[n] - a[n]});
    }
  }
  return out;
}

void SweepConfig::validate() const {
  model.validate();
  grid.validate();
  if (grid.planar()) throw ConfigError("sweep needs a 3D grid (nz >= 2)");
  if (eps_list.size() < 2) throw ConfigError("sweep needs at least two eps values");
  for (std::size_t k = 0; k < eps_list.size(); ++k) {
    if (!(eps_list[k] > 0.0)) throw ConfigError("eps values must be positive");
    if (k > 0 && !(eps_list[k] < eps_list[k - 1]))
      throw ConfigError("eps values must be strictly decreasing");
  }
  if (phase.enabled) phase.validate();
  program.validate();
}

namespace {

double terminal_gap(const SweepMember& m, const std::optional<EvolutionTrace>& limit,
                    double TraceRow::*field) {
  if (!m.trace || !limit) return std::numeric_limits<double>::quiet_NaN();
  return std::abs(m.trace->rows.back().*field - limit->rows.back().*field);
}

}  // namespace

std::vector<double> SweepReport::terminal_bulk_gaps() const {
  std::vector<double> g;
  for (const auto& m : members) g.push_back(terminal_gap(m, limit, &TraceRow::bulk));
  return g;
}

std::vector<double> SweepReport::terminal_surface_gaps() const {
  std::vector<double> g;
  for (const auto& m : members) g.push_back(terminal_gap(m, limit, &TraceRow::surface));
  return g;
}

std::vector<double> SweepReport::terminal_total_gaps() const {
  std::vector<double> g;
  for (const auto& m : members) g.push_back(terminal_gap(m, limit, &TraceRow::total));
  return g;
}

std::vector<std::vector<double>> SweepReport::pairing_gaps() const {
  std::vector<std::vector<double>> out;
  for (const auto& m : members) {
    std::vector<double> row;
    for (std::size_t k = 0; k < limit_pairings.size(); ++k)
      row.push_back(m.trace && k < m.pairings.size()
                        ? std::abs(m.pairings[k] - limit_pairings[k])
                        : std::numeric_limits<double>::quiet_NaN());
    out.push_back(row);
  }
  return out;
}

SweepReport run_sweep(const SweepConfig& cfg) {
  cfg.validate();
  SweepReport rep;
  rep.eps_list = cfg.eps_list;
  rep.members.resize(cfg.eps_list.size());

  // The relaxed 2D problem on the same in-plane grid.
  EvolutionProblem limit_pb;
  limit_pb.grid = cfg.grid;
  limit_pb.grid.nz = 1;
  limit_pb.eps = 0.0;
  limit_pb.density = make_limit_density(cfg.model, cfg.table);
  limit_pb.phase = cfg.phase;
  limit_pb.program = cfg.program;
  limit_pb.options = cfg.options;
  // Horizontal seeds have no planar counterpart.
  limit_pb.options.seeds.clear();
  for (const auto& s : cfg.options.seeds)
    if (s.axis != 2) limit_pb.options.seeds.push_back(s);

  const auto bulk3d = make_bulk_density(cfg.model);
  auto run_member = [&](std::size_t k) {
    SweepMember& m = rep.members[k];
    m.eps = cfg.eps_list[k];
    EvolutionProblem pb;
    pb.grid = cfg.grid;
    pb.eps = m.eps;
    pb.density = bulk3d;
    pb.phase = cfg.phase;
    pb.program = cfg.program;
    pb.options = cfg.options;
    try {
      m.trace = run_evolution(pb);
      const auto& fs = m.trace->final_state;
      for (const auto& tf : cfg.test_fields) m.pairings.push_back(stress_pairing(pb, fs, tf.sample(pb.grid)));
      m.x3_inv = x3_invariance(fs.v);
      m.horizontal_fraction = cfg.phase.enabled ? horizontal_fraction(fs.v, m.eps, cfg.phase) : 0.0;
    } catch (const std::exception& e) {
      m.trace.reset();
      m.error = e.what();
      log_warn(fmt::format("sweep member eps = {} failed: {}", m.eps, e.what()));
    }
  };

  const std::size_t n = cfg.eps_list.size();
  const int workers = std::max(1, std::min<int>(cfg.jobs, static_cast<int>(n)));
  if (workers == 1) {
    for (std::size_t k = 0; k < n; ++k) run_member(k);
  } else {
    std::vector<std::thread> pool;
    for (int id = 0; id < workers; ++id)
      pool.emplace_back([&, id] {
        for (std::size_t k = id; k < n; k += workers) run_member(k);
      });
    for (auto& t : pool) t.join();
  }

  try {
    rep.limit = run_evolution(limit_pb);
    const auto& fs = rep.limit->final_state;
    for (const auto& tf : cfg.test_fields)
      rep.limit_pairings.push_back(stress_pairing(limit_pb, fs, tf.sample(limit_pb.grid)));
  } catch (const std::exception& e) {
    log_warn(fmt::format("limit evolution failed: {}", e.what()));
    rep.partial = true;
  }

  for (const auto& m : rep.members) {
    if (!m.trace) {
      rep.partial = true;
      continue;
    }
    if (!rep.limit) continue;
    for (std::size_t k = 0; k < m.trace->rows.size(); ++k) {
      const auto& a = m.trace->rows[k];
      const auto& b = rep.limit->rows[k];
      rep.metrics.push_back({a.t, m.eps, std::abs(a.bulk - b.bulk), std::abs(a.surface - b.surface),
                             std::abs(a.total - b.total), x3_invariance(m.trace->v_checkpoints[k])});
    }
  }
  return rep;
}

}  // namespace lamella

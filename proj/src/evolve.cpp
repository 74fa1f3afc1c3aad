#include "lamella/evolve.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <fmt/format.h>

#include "lamella/csv.hpp"
#include "lamella/errors.hpp"
#include "lamella/log.hpp"

namespace lamella {

// ---------------------------------------------------------------------------
// Boundary program

void BoundaryProgram::validate() const {
  if (!load.allFinite() || !direction.allFinite() || !transverse.allFinite() ||
      !std::isfinite(amplitude))
    throw ConfigError("boundary program has non-finite entries");
  if (!(final_time > 0.0)) throw ConfigError("final time must be positive");
  if (steps < 1) throw ConfigError("time grid needs at least two points");
  if (sup_u_bound && !(*sup_u_bound > 0.0)) throw ConfigError("sup_u bound must be positive");
}

std::vector<double> BoundaryProgram::times() const {
  std::vector<double> t(steps + 1);
  for (int k = 0; k <= steps; ++k) t[k] = final_time * k / steps;
  return t;
}

Vec3 BoundaryProgram::datum(const Vec3& x, double t, double eps, bool planar, const Grid& g) const {
  Vec3 out = load * x.head<2>();
  if (amplitude != 0.0)
    out += amplitude * std::sin(M_PI * x[0] / g.lx) * std::sin(M_PI * x[1] / g.ly) * direction;
  out *= t;
  if (!planar) out += eps * (x[2] + 1.0) * t * transverse;
  return out;
}

Vec3 BoundaryProgram::rate(const Vec3& x, double, double eps, bool planar, const Grid& g) const {
  // g is linear in t.
  return datum(x, 1.0, eps, planar, g);
}

Field BoundaryProgram::datum_field(const Grid& g, double t, double eps) const {
  Field f(g, 3);
  for (int n = 0; n < g.node_count(); ++n) f.set_vec(n, datum(g.position(n), t, eps, g.planar(), g));
  return f;
}

Field BoundaryProgram::rate_field(const Grid& g, double t, double eps) const {
  Field f(g, 3);
  for (int n = 0; n < g.node_count(); ++n) f.set_vec(n, rate(g.position(n), t, eps, g.planar(), g));
  return f;
}

bool BoundaryProgram::is_zero() const {
  return load.isZero(0.0) && (amplitude == 0.0 || direction.isZero(0.0)) && transverse.isZero(0.0);
}

Field seed_profile(const Grid& grid, const CrackSeed& seed, double ell, double eps) {
  if (seed.axis < 0 || seed.axis > 2) throw ConfigError("seed axis must be 0, 1 or 2");
  if (seed.axis == 2 && grid.planar()) throw ConfigError("horizontal seed on a planar grid");
  const double len = seed.axis == 2 ? 2.0 * ell / eps : 2.0 * ell;
  Field v(grid, 1);
  for (int n = 0; n < grid.node_count(); ++n) {
    const double d = std::abs(grid.position(n)[seed.axis] - seed.position);
    v.at(n) = 1.0 - std::exp(-d / len);
  }
  return v;
}

void EvolutionProblem::validate() const {
  grid.validate();
  if (!density) throw ConfigError("evolution needs a density");
  if (!grid.planar() && !(eps > 0.0)) throw ConfigError("3D evolution needs eps > 0");
  if (phase.enabled) phase.validate();
  program.validate();
  if (!(options.tol_alt > 0.0) || options.max_sweeps < 1) throw ConfigError("invalid alternate-minimization options");
}

// ---------------------------------------------------------------------------
// Discrete operators

namespace {

using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;
using Solver = Eigen::SimplicialLDLT<SpMat>;

struct Disc {
  const EvolutionProblem& pb;
  CellKernel kernel;
  DofMap dofs;
  std::vector<std::array<int, 8>> nodes;
  std::vector<char> omega;
  double ie;
  int per;
  int nq;

  explicit Disc(const EvolutionProblem& p)
      : pb(p),
        kernel(p.grid, Quadrature::gauss),
        dofs(make_dof_map(p.grid)),
        ie(p.grid.planar() ? 1.0 : 1.0 / p.eps),
        per(kernel.nodes_per_cell()),
        nq(static_cast<int>(kernel.points().size())) {
    const int nc = p.grid.cell_count();
    nodes.resize(nc);
    omega.resize(nc);
    for (int c = 0; c < nc; ++c) {
      nodes[c] = kernel.cell_nodes(c);
      omega[c] = p.grid.cell_in_omega(c);
    }
  }

  Vec3 sdn(const QuadPoint& q, int a) const { return Vec3(q.dn[a][0], q.dn[a][1], q.dn[a][2] * ie); }

  FullMatrix grad(const Eigen::VectorXd& u, int c, const QuadPoint& q) const {
    return scaled_gradient_at(u, nodes[c], per, q, ie);
  }

  // Degradation v^2 + eta at every (omega cell, point); zero elsewhere.
  std::vector<double> degradation(const Eigen::VectorXd& v) const {
    const double eta = pb.phase.eta_value();
    std::vector<double> coef(nodes.size() * nq, 0.0);
    for (std::size_t c = 0; c < nodes.size(); ++c) {
      if (!omega[c]) continue;
      for (int k = 0; k < nq; ++k) {
        const double vq = pb.phase.enabled ? value_at(v, nodes[c], per, kernel.points()[k]) : 1.0;
        coef[c * nq + k] = vq * vq + eta;
      }
    }
    return coef;
  }

  double bulk(const Eigen::VectorXd& u, const std::vector<double>& coef) const {
    double e = 0.0;
    for (std::size_t c = 0; c < nodes.size(); ++c) {
      if (!omega[c]) continue;
      for (int k = 0; k < nq; ++k) {
        const auto& q = kernel.points()[k];
        e += q.weight * coef[c * nq + k] * pb.density->value(grad(u, static_cast<int>(c), q));
      }
    }
    return e;
  }

  // Weighted scalar stiffness on free nodes; `coupling` collects the
  // free-Dirichlet entries as (free index, node, value) for right-hand sides.
  struct Stiffness {
    SpMat k;
    std::vector<std::tuple<int, int, double>> coupling;
  };

  Stiffness stiffness(const std::vector<double>& coef, double scale) const {
    std::vector<Triplet> trip;
    Stiffness s;
    const int nf = static_cast<int>(dofs.free_nodes.size());
    for (std::size_t c = 0; c < nodes.size(); ++c) {
      if (!omega[c]) continue;
      for (int k = 0; k < nq; ++k) {
        const auto& q = kernel.points()[k];
        const double w = scale * q.weight * coef[c * nq + k];
        for (int a = 0; a < per; ++a) {
          const int fa = dofs.index[nodes[c][a]];
          if (fa < 0) continue;
          const Vec3 ga = sdn(q, a);
          for (int b = 0; b < per; ++b) {
            const double val = w * ga.dot(sdn(q, b));
            const int fb = dofs.index[nodes[c][b]];
            if (fb >= 0)
              trip.emplace_back(fa, fb, val);
            else
              s.coupling.emplace_back(fa, nodes[c][b], val);
          }
        }
      }
    }
    s.k.resize(nf, nf);
    s.k.setFromTriplets(trip.begin(), trip.end());
    return s;
  }

  // Gradient of the bulk energy with respect to all nodal u (3 per node).
  Eigen::VectorXd bulk_gradient(const Eigen::VectorXd& u, const std::vector<double>& coef) const {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(u.size());
    for (std::size_t c = 0; c < nodes.size(); ++c) {
      if (!omega[c]) continue;
      for (int k = 0; k < nq; ++k) {
        const auto& q = kernel.points()[k];
        const FullMatrix dw =
            q.weight * coef[c * nq + k] * pb.density->gradient(grad(u, static_cast<int>(c), q));
        for (int a = 0; a < per; ++a) g.segment<3>(3 * nodes[c][a]) += dw * sdn(q, a);
      }
    }
    return g;
  }
};

Eigen::VectorXd gather_free(const Disc& d, const Eigen::VectorXd& full) {
  const int nf = static_cast<int>(d.dofs.free_nodes.size());
  Eigen::VectorXd out(3 * nf);
  for (int f = 0; f < nf; ++f) out.segment<3>(3 * f) = full.segment<3>(3 * d.dofs.free_nodes[f]);
  return out;
}

void factor(Solver& solver, const SpMat& k, const char* what) {
  solver.compute(k);
  if (solver.info() != Eigen::Success)
    throw NumericalError(fmt::format("{}: factorization failed", what), std::nan(""));
}

// Minimizes sum w c |F - M_q|^2 over free u for fixed per-point shifts.
void solve_shifted(const Disc& d, const Solver& solver, const Disc::Stiffness& st,
                   const std::vector<double>& coef, const std::vector<FullMatrix>& shifts,
                   Eigen::VectorXd& u) {
  const int nf = static_cast<int>(d.dofs.free_nodes.size());
  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(nf, 3);
  for (std::size_t c = 0; c < d.nodes.size(); ++c) {
    if (!d.omega[c]) continue;
    for (int k = 0; k < d.nq; ++k) {
      const auto& q = d.kernel.points()[k];
      const double w = q.weight * coef[c * d.nq + k];
      if (w == 0.0) continue;
      const FullMatrix& m = shifts.size() == 1 ? shifts[0] : shifts[c * d.nq + k];
      for (int a = 0; a < d.per; ++a) {
        const int fa = d.dofs.index[d.nodes[c][a]];
        if (fa < 0) continue;
        rhs.row(fa) += w * (m * d.sdn(q, a)).transpose();
      }
    }
  }
  for (const auto& [fa, node, val] : st.coupling) rhs.row(fa) -= val * u.segment<3>(3 * node).transpose();
  const Eigen::MatrixXd sol = solver.solve(rhs);
  if (solver.info() != Eigen::Success || !sol.allFinite())
    throw NumericalError("u-step: linear solve failed", (st.k * sol - rhs).norm());
  for (int f = 0; f < nf; ++f) u.segment<3>(3 * d.dofs.free_nodes[f]) = sol.row(f).transpose();
}

// u-step at fixed v. Returns the bulk energy reached.
double u_step(const Disc& d, const std::vector<double>& coef, Eigen::VectorXd& u) {
  const auto& w = *d.pb.density;
  const auto& opt = d.pb.options;
  if (d.dofs.free_nodes.empty()) return d.bulk(u, coef);

  if (auto m = w.quadratic_shift()) {
    const auto st = d.stiffness(coef, 1.0);
    Solver solver;
    factor(solver, st.k, "u-step");
    solve_shifted(d, solver, st, coef, {*m}, u);
    return d.bulk(u, coef);
  }

  double e = d.bulk(u, coef);
  if (w.majorizer_shift(FullMatrix::Zero())) {
    // Majorize-minimize: each branch is a shifted quadratic touching W at the
    // current gradient, so every solve decreases the energy.
    const auto st = d.stiffness(coef, 1.0);
    Solver solver;
    factor(solver, st.k, "u-step");
    std::vector<FullMatrix> shifts(d.nodes.size() * d.nq, FullMatrix::Zero());
    for (int it = 0; it < opt.max_inner; ++it) {
      for (std::size_t c = 0; c < d.nodes.size(); ++c) {
        if (!d.omega[c]) continue;
        for (int k = 0; k < d.nq; ++k)
          shifts[c * d.nq + k] =
              *w.majorizer_shift(d.grad(u, static_cast<int>(c), d.kernel.points()[k]));
      }
      Eigen::VectorXd trial = u;
      solve_shifted(d, solver, st, coef, shifts, trial);
      const double et = d.bulk(trial, coef);
      if (et > e) break;  // no progress at round-off level
      u = trial;
      const double dec = e - et;
      e = et;
      if (dec <= opt.tol_inner * std::max(std::abs(e), 1e-300)) break;
    }
    return e;
  }

  const int nf = static_cast<int>(d.dofs.free_nodes.size());
  std::unique_ptr<Solver> precond;
  if (!w.has_hessian()) {
    precond = std::make_unique<Solver>();
    factor(*precond, d.stiffness(coef, 2.0).k, "u-step preconditioner");
  }
  for (int it = 0; it < opt.max_inner; ++it) {
    const Eigen::VectorXd gfull = d.bulk_gradient(u, coef);
    const Eigen::VectorXd g = gather_free(d, gfull);
    if (g.norm() <= 1e-13 * (1.0 + std::abs(e))) break;
    Eigen::VectorXd dir(3 * nf);
    if (w.has_hessian()) {
      std::vector<Triplet> trip;
      for (std::size_t c = 0; c < d.nodes.size(); ++c) {
        if (!d.omega[c]) continue;
        for (int k = 0; k < d.nq; ++k) {
          const auto& q = d.kernel.points()[k];
          const Hessian9 h = q.weight * d.pb.density->hessian(d.grad(u, static_cast<int>(c), q)) *
                             coef[c * d.nq + k];
          for (int a = 0; a < d.per; ++a) {
            const int fa = d.dofs.index[d.nodes[c][a]];
            if (fa < 0) continue;
            const Vec3 ga = d.sdn(q, a);
            for (int b = 0; b < d.per; ++b) {
              const int fb = d.dofs.index[d.nodes[c][b]];
              if (fb < 0) continue;
              const Vec3 gb = d.sdn(q, b);
              for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j) {
                  double s = 0.0;
                  for (int al = 0; al < 3; ++al)
                    for (int be = 0; be < 3; ++be) s += h(i + 3 * al, j + 3 * be) * ga[al] * gb[be];
                  if (s != 0.0) trip.emplace_back(3 * fa + i, 3 * fb + j, s);
                }
            }
          }
        }
      }
      SpMat hm(3 * nf, 3 * nf);
      hm.setFromTriplets(trip.begin(), trip.end());
      Solver s;
      s.compute(hm);
      if (s.info() == Eigen::Success) dir = -s.solve(g);
      if (s.info() != Eigen::Success || !dir.allFinite() || dir.dot(g) >= 0.0) dir = -g;
    } else {
      Eigen::MatrixXd gm(nf, 3);
      for (int f = 0; f < nf; ++f) gm.row(f) = g.segment<3>(3 * f).transpose();
      const Eigen::MatrixXd dm = -precond->solve(gm);
      for (int f = 0; f < nf; ++f) dir.segment<3>(3 * f) = dm.row(f).transpose();
    }
    const double slope = dir.dot(g);
    double step = 1.0;
    bool moved = false;
    for (int ls = 0; ls < 50; ++ls) {
      Eigen::VectorXd trial = u;
      for (int f = 0; f < nf; ++f)
        trial.segment<3>(3 * d.dofs.free_nodes[f]) += step * dir.segment<3>(3 * f);
      const double et = d.bulk(trial, coef);
      if (et <= e + 1e-4 * step * slope) {
        const double dec = e - et;
        u = std::move(trial);
        e = et;
        moved = true;
        if (dec <= opt.tol_inner * std::max(std::abs(e), 1e-300)) it = opt.max_inner;
        break;
      }
      step *= 0.5;
    }
    if (!moved) break;
  }
  return e;
}

// ---------------------------------------------------------------------------
// v-step: min 1/2 v'Av - b'v subject to lo <= v <= hi.

struct PhaseQp {
  SpMat a;
  Eigen::VectorXd b;
  double objective(const Eigen::VectorXd& v) const { return 0.5 * v.dot(a * v) - b.dot(v); }
};

PhaseQp assemble_phase_qp(const Disc& d, const Eigen::VectorXd& u) {
  const auto& pp = d.pb.phase;
  const double gc = pp.surface_toughness(d.pb.grid), ell = pp.ell;
  const int nn = d.pb.grid.node_count();
  std::vector<Triplet> trip;
  PhaseQp qp;
  qp.b = Eigen::VectorXd::Zero(nn);
  for (std::size_t c = 0; c < d.nodes.size(); ++c) {
    for (int k = 0; k < d.nq; ++k) {
      const auto& q = d.kernel.points()[k];
      const double bulk = d.omega[c] ? d.pb.density->value(d.grad(u, static_cast<int>(c), q)) : 0.0;
      const double mass = 2.0 * q.weight * (bulk + gc / (4.0 * ell));
      const double stiff = 2.0 * q.weight * gc * ell;
      for (int a = 0; a < d.per; ++a) {
        const int na = d.nodes[c][a];
        qp.b[na] += 2.0 * q.weight * gc / (4.0 * ell) * q.n[a];
        const Vec3 ga = d.sdn(q, a);
        for (int bb = 0; bb < d.per; ++bb)
          trip.emplace_back(na, d.nodes[c][bb], mass * q.n[a] * q.n[bb] + stiff * ga.dot(d.sdn(q, bb)));
      }
    }
  }
  qp.a.resize(nn, nn);
  qp.a.setFromTriplets(trip.begin(), trip.end());
  return qp;
}

// Primal-dual active set iterations; false if they fail to settle. Bounds
// reached to within kSlack count as active, so a v already at its optimum on
// the bound is not perturbed by roundoff in the multipliers.
constexpr double kSlack = 1e-14;

int classify(double y, double lo, double hi) {
  if (hi - lo <= 0.0 || y > hi - kSlack) return 1;
  return y < lo + kSlack ? -1 : 0;
}

bool pdas(const PhaseQp& qp, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi, Eigen::VectorXd& v) {
  const int n = static_cast<int>(v.size());
  const Eigen::VectorXd diag = qp.a.diagonal();
  std::vector<signed char> state(n, 0), next(n, 0);  // -1 lower, +1 upper, 0 free
  Eigen::VectorXd x = v;
  Eigen::VectorXd lambda = qp.b - qp.a * x;
  for (int i = 0; i < n; ++i) {
    const double y = x[i] + lambda[i] / diag[i];
    state[i] = static_cast<signed char>(classify(y, lo[i], hi[i]));
  }
  for (int it = 0; it < 100; ++it) {
    std::vector<int> index(n, -1), free_set;
    for (int i = 0; i < n; ++i) {
      if (state[i] == 1) x[i] = hi[i];
      else if (state[i] == -1) x[i] = lo[i];
      else {
        index[i] = static_cast<int>(free_set.size());
        free_set.push_back(i);
      }
    }
    if (!free_set.empty()) {
      const int nf = static_cast<int>(free_set.size());
      std::vector<Triplet> trip;
      Eigen::VectorXd rhs(nf);
      for (int f = 0; f < nf; ++f) rhs[f] = qp.b[free_set[f]];
      for (int col = 0; col < qp.a.outerSize(); ++col)
        for (SpMat::InnerIterator itr(qp.a, col); itr; ++itr) {
          const int r = static_cast<int>(itr.row());
          if (index[r] < 0) continue;
          if (index[col] >= 0)
            trip.emplace_back(index[r], index[col], itr.value());
          else
            rhs[index[r]] -= itr.value() * x[col];
        }
      SpMat ar(nf, nf);
      ar.setFromTriplets(trip.begin(), trip.end());
      Solver s(ar);
      if (s.info() != Eigen::Success) return false;
      const Eigen::VectorXd xf = s.solve(rhs);
      if (!xf.allFinite()) return false;
      for (int f = 0; f < nf; ++f) x[free_set[f]] = xf[f];
    }
    lambda = qp.b - qp.a * x;
    bool same = true;
    for (int i = 0; i < n; ++i) {
      const double mult = state[i] == 0 ? 0.0 : lambda[i];
      const double y = x[i] + mult / diag[i];
      next[i] = static_cast<signed char>(classify(y, lo[i], hi[i]));
      same = same && next[i] == state[i];
    }
    if (same) {
      v = x.cwiseMax(lo).cwiseMin(hi);
      return true;
    }
    state.swap(next);
  }
  return false;
}

// Projected Gauss-Seidel; monotone in the QP objective for SPD A.
void projected_gauss_seidel(const PhaseQp& qp, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                            Eigen::VectorXd& v) {
  const SpMat at = qp.a.transpose();  // row access via columns of the transpose
  for (int sweep = 0; sweep < 20000; ++sweep) {
    double change = 0.0;
    for (int i = 0; i < at.outerSize(); ++i) {
      double r = qp.b[i], diag = 0.0;
      for (SpMat::InnerIterator it(at, i); it; ++it) {
        if (it.row() == i)
          diag = it.value();
        else
          r -= it.value() * v[it.row()];
      }
      const double nv = std::clamp(r / diag, lo[i], hi[i]);
      change = std::max(change, std::abs(nv - v[i]));
      v[i] = nv;
    }
    if (change < 1e-13) return;
  }
}

void v_step(const Disc& d, const Eigen::VectorXd& u, const Eigen::VectorXd& prev_v, Eigen::VectorXd& v) {
  const PhaseQp qp = assemble_phase_qp(d, u);
  const Eigen::VectorXd lo = Eigen::VectorXd::Zero(v.size());
  const double before = qp.objective(v);
  Eigen::VectorXd x = v;
  if (pdas(qp, lo, prev_v, x) && qp.objective(x) <= before) {
    v = x;
    return;
  }
  log_debug("v-step: active-set iteration did not settle; using projected Gauss-Seidel");
  x = v;
  projected_gauss_seidel(qp, lo, prev_v, x);
  if (qp.objective(x) <= before) v = x;
}

double surface(const EvolutionProblem& pb, const Field& v) {
  if (!pb.phase.enabled) return 0.0;
  return at_surface_energy(v, pb.eps, pb.phase);
}

void impose_datum(const EvolutionProblem& pb, double t, Field& u) {
  for (int n = 0; n < pb.grid.node_count(); ++n)
    if (pb.grid.dirichlet_node(n))
      u.set_vec(n, pb.program.datum(pb.grid.position(n), t, pb.eps, pb.grid.planar(), pb.grid));
}

struct AltResult {
  EvolutionState state;
  StepEnergies energies;
  int sweeps;
};

AltResult alternate(const EvolutionProblem& pb, const Disc& d, EvolutionState s, const Field& prev_v) {
  const auto& opt = pb.options;
  auto coef = d.degradation(s.v.values);
  double bulk = d.bulk(s.u.values, coef);
  double surf = surface(pb, s.v);
  double e = bulk + surf;
  int sweeps = 0;
  for (; sweeps < opt.max_sweeps; ++sweeps) {
    bulk = u_step(d, coef, s.u.values);
    const double e_u = bulk + surf;
    if (e_u > e + 1e-12 * (1.0 + std::abs(e)))
      throw InvariantViolation(fmt::format("u-step raised the energy from {} to {}", e, e_u));
    if (!pb.phase.enabled) {
      e = e_u;
      ++sweeps;
      break;
    }
    v_step(d, s.u.values, prev_v.values, s.v.values);
    coef = d.degradation(s.v.values);
    bulk = d.bulk(s.u.values, coef);
    surf = surface(pb, s.v);
    const double e_v = bulk + surf;
    if (e_v > e_u + 1e-12 * (1.0 + std::abs(e_u)))
      throw InvariantViolation(fmt::format("v-step raised the energy from {} to {}", e_u, e_v));
    const double dec = e - e_v;
    e = e_v;
    if (dec <= opt.tol_alt * std::abs(e)) {
      ++sweeps;
      break;
    }
  }
  return {std::move(s), {bulk, surf}, sweeps};
}

}  // namespace

StepEnergies evaluate_energies(const EvolutionProblem& pb, const EvolutionState& s) {
  const Disc d(pb);
  const auto coef = d.degradation(s.v.values);
  return {d.bulk(s.u.values, coef), surface(pb, s.v)};
}

EvolutionState initial_state(const EvolutionProblem& pb, double t) {
  EvolutionState s;
  s.u = pb.program.datum_field(pb.grid, t, pb.eps);
  s.v = Field(pb.grid, 1, 1.0);
  s.t = t;
  return s;
}

StepResult minimize_at_step(const EvolutionProblem& pb, const EvolutionState& guess, double t,
                            const Field& prev_v) {
  check_phase_range(prev_v);
  const Disc d(pb);
  EvolutionState warm = guess;
  warm.t = t;
  impose_datum(pb, t, warm.u);
  warm.v.values = pb.phase.enabled ? warm.v.values.cwiseMin(prev_v.values).eval()
                                   : Eigen::VectorXd::Ones(prev_v.values.size()).eval();

  AltResult best = alternate(pb, d, warm, prev_v);
  int start = -1;
  if (pb.phase.enabled && pb.options.multistart) {
    for (std::size_t k = 0; k < pb.options.seeds.size(); ++k) {
      EvolutionState trial = warm;
      const Field seed = seed_profile(pb.grid, pb.options.seeds[k], pb.phase.ell, pb.eps);
      trial.v.values = trial.v.values.cwiseMin(seed.values);
      AltResult r = alternate(pb, d, trial, prev_v);
      if (r.energies.total() < best.energies.total()) {
        best = std::move(r);
        start = static_cast<int>(k);
      }
    }
  }
  return {std::move(best.state), best.energies, best.sweeps, start};
}

double work_rate(const EvolutionProblem& pb, const EvolutionState& s, const Field& gdot) {
  const Disc d(pb);
  const auto coef = d.degradation(s.v.values);
  double theta = 0.0;
  for (std::size_t c = 0; c < d.nodes.size(); ++c) {
    if (!d.omega[c]) continue;
    for (int k = 0; k < d.nq; ++k) {
      const auto& q = d.kernel.points()[k];
      const FullMatrix stress = pb.density->gradient(d.grad(s.u.values, static_cast<int>(c), q));
      const FullMatrix rate = d.grad(gdot.values, static_cast<int>(c), q);
      theta += q.weight * coef[c * d.nq + k] * (stress.array() * rate.array()).sum();
    }
  }
  return theta;
}

void EvolutionTrace::write_csv(const std::filesystem::path& path) const {
  std::vector<std::vector<std::string>> out;
  for (const auto& r : rows)
    out.push_back({format_number(r.t), format_number(r.bulk), format_number(r.surface),
                   format_number(r.total), format_number(r.work_inc), format_number(r.work_cum),
                   format_number(r.residual), std::to_string(r.alt_iters), format_number(r.sup_u)});
  lamella::write_csv(path,
                     {"t", "bulk", "surface", "total", "work_inc", "work_cum", "residual",
                      "alt_iters", "sup_u"},
                     out);
}

EvolutionTrace run_evolution(const EvolutionProblem& pb) {
  pb.validate();
  if (pb.phase.enabled) {
    if (!pb.phase.resolves(pb.grid))
      log_warn(fmt::format("ell = {} does not resolve the grid spacing {}", pb.phase.ell,
                           pb.grid.min_spacing()));
    if (pb.grid.frame * std::min(pb.grid.hx(), pb.grid.hy()) < 4.0 * pb.phase.ell)
      log_debug("frame narrower than 4 ell: boundary cracks are under-charged");
  }
  const auto times = pb.program.times();
  EvolutionTrace trace;

  auto check_bound = [&](double sup_u, double t) {
    if (pb.program.sup_u_bound && sup_u > *pb.program.sup_u_bound)
      throw BoundExceeded(fmt::format("sup|u| = {} exceeds the bound {} at t = {}", sup_u,
                                      *pb.program.sup_u_bound, t),
                          sup_u);
  };

  EvolutionState s0 = initial_state(pb, times[0]);
  StepResult r = minimize_at_step(pb, s0, times[0], s0.v);
  TraceRow row;
  row.t = times[0];
  row.bulk = r.energies.bulk;
  row.surface = r.energies.surface;
  row.total = r.energies.total();
  row.alt_iters = r.sweeps;
  row.sup_u = r.state.u.sup_norm();
  check_bound(row.sup_u, row.t);
  const double total0 = row.total;
  trace.rows.push_back(row);
  trace.v_checkpoints.push_back(r.state.v);

  EvolutionState state = std::move(r.state);
  double work_cum = 0.0;
  for (std::size_t k = 1; k < times.size(); ++k) {
    const double t0 = times[k - 1], t1 = times[k];
    EvolutionState guess = state;
    guess.u.values += pb.program.datum_field(pb.grid, t1, pb.eps).values -
                      pb.program.datum_field(pb.grid, t0, pb.eps).values;
    StepResult next = minimize_at_step(pb, guess, t1, state.v);

    const Field gdot = pb.program.rate_field(pb.grid, 0.5 * (t0 + t1), pb.eps);
    const double inc = (t1 - t0) * 0.5 * (work_rate(pb, state, gdot) + work_rate(pb, next.state, gdot));
    work_cum += inc;

    TraceRow tr;
    tr.t = t1;
    tr.bulk = next.energies.bulk;
    tr.surface = next.energies.surface;
    tr.total = next.energies.total();
    tr.work_inc = inc;
    tr.work_cum = work_cum;
    tr.residual = tr.total - total0 - work_cum;
    tr.alt_iters = next.sweeps;
    tr.sup_u = next.state.u.sup_norm();
    check_bound(tr.sup_u, t1);
    trace.rows.push_back(tr);
    trace.v_checkpoints.push_back(next.state.v);
    log_debug(fmt::format("t = {:.4f}: total {:.6g} (surface {:.6g}), {} sweeps", t1, tr.total,
                          tr.surface, tr.alt_iters));
    state = std::move(next.state);
  }
  trace.final_state = std::move(state);
  return trace;
}

// ---------------------------------------------------------------------------
// Stability probing

StabilityReport stability_check(const EvolutionProblem& pb, const EvolutionState& s,
                                int n_competitors, std::uint64_t seed, double tol_rel) {
  const Disc d(pb);
  const auto coef = d.degradation(s.v.values);
  const double surf = surface(pb, s.v);
  const double e = d.bulk(s.u.values, coef) + surf;

  StabilityReport rep;
  rep.energy = e;
  rep.min_gap = std::numeric_limits<double>::infinity();
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> mode(1, 3);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal;
  const Grid& g = pb.grid;
  const double scale = 1.0 + s.u.sup_norm();

  for (int k = 0; k < n_competitors; ++k) {
    double gap;
    std::string what;
    if (k % 2 == 0) {
      // Smooth bump on u vanishing on the Dirichlet frame.
      const int m1 = mode(rng), m2 = mode(rng), m3 = mode(rng) - 1;
      Vec3 dir(normal(rng), normal(rng), normal(rng));
      dir.normalize();
      const double amp = scale * std::pow(10.0, -3.0 + 2.0 * unit(rng));
      Field u = s.u;
      for (int n = 0; n < g.node_count(); ++n) {
        if (g.dirichlet_node(n)) continue;
        const Vec3 x = g.position(n);
        const double b = std::sin(m1 * M_PI * x[0] / g.lx) * std::sin(m2 * M_PI * x[1] / g.ly) *
                         std::cos(m3 * M_PI * (x[2] + 1.0) / 2.0);
        u.set_vec(n, u.vec(n) + amp * b * dir);
      }
      gap = d.bulk(u.values, coef) + surf - e;
      what = fmt::format("u bump (modes {},{},{}; amplitude {:.3g})", m1, m2, m3, amp);
    } else {
      // Enlarged crack v' = v (1 - bump) <= v, then relax u.
      Field v = s.v;
      if (k > 1 && pb.phase.enabled) {
        const Vec3 center(g.lx * unit(rng), g.ly * unit(rng), g.planar() ? 0.0 : 2.0 * unit(rng) - 1.0);
        const double radius = pb.phase.ell * (1.0 + 3.0 * unit(rng));
        const double depth = unit(rng);
        for (int n = 0; n < g.node_count(); ++n) {
          const Vec3 x = g.position(n);
          const double r2 = (x.head<2>() - center.head<2>()).squaredNorm();
          v.at(n) *= 1.0 - depth * std::exp(-r2 / (2.0 * radius * radius));
        }
        what = fmt::format("crack enlargement (depth {:.3g}, radius {:.3g})", depth, radius);
      } else {
        what = "u relaxation at fixed v";
      }
      Field u = s.u;
      const auto c2 = d.degradation(v.values);
      const double bulk = u_step(d, c2, u.values);
      gap = bulk + surface(pb, v) - e;
    }
    ++rep.competitors;
    if (gap < rep.min_gap) {
      rep.min_gap = gap;
      rep.worst = what;
    }
  }
  if (n_competitors <= 0) rep.min_gap = 0.0;
  rep.passed = rep.min_gap >= -tol_rel * std::abs(e) - 1e-14;
  return rep;
}

}  // namespace lamella

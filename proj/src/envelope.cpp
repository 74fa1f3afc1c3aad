#include "lamella/envelope.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include <boost/math/tools/minima.hpp>
#include <ceres/gradient_problem.h>
#include <ceres/gradient_problem_solver.h>
#include <fmt/format.h>

#include "lamella/errors.hpp"

namespace lamella {

PlanarMatrix PlanarDensity::grad(const PlanarMatrix& xibar) const {
  if (gradient) return gradient(xibar);
  const double h = 1e-6 * std::max(1.0, xibar.norm());
  PlanarMatrix g;
  for (int k = 0; k < 6; ++k) {
    PlanarMatrix plus = xibar, minus = xibar;
    plus(k) += h;
    minus(k) -= h;
    g(k) = (value(plus) - value(minus)) / (2.0 * h);
  }
  return g;
}

PlanarDensity make_w0(const DensityModel& model) {
  const PlanarMatrix m = model.shift.leftCols<2>();
  switch (model.kind) {
    case DensityKind::quadratic_isotropic:
      return {[](const PlanarMatrix& x) { return x.squaredNorm(); },
              [](const PlanarMatrix& x) -> PlanarMatrix { return 2.0 * x; }};
    case DensityKind::quadratic_shifted:
      return {[m](const PlanarMatrix& x) { return (x - m).squaredNorm(); },
              [m](const PlanarMatrix& x) -> PlanarMatrix { return 2.0 * (x - m); }};
    case DensityKind::double_well:
      return {[m](const PlanarMatrix& x) {
                return std::min((x - m).squaredNorm(), (x + m).squaredNorm());
              },
              [m](const PlanarMatrix& x) -> PlanarMatrix {
                return (x - m).squaredNorm() <= (x + m).squaredNorm() ? PlanarMatrix(2.0 * (x - m))
                                                                       : PlanarMatrix(2.0 * (x + m));
              }};
    case DensityKind::p_power: {
      const double p = model.p, kappa = model.kappa;
      return {[m, p, kappa](const PlanarMatrix& x) {
                return std::pow(kappa + (x - m).squaredNorm(), p / 2.0);
              },
              [m, p, kappa](const PlanarMatrix& x) -> PlanarMatrix {
                const double s = kappa + (x - m).squaredNorm();
                if (s == 0.0) return PlanarMatrix::Zero();
                return p * std::pow(s, p / 2.0 - 1.0) * (x - m);
              }};
    }
  }
  throw ConfigError("make_w0: unknown density kind");
}

namespace {

// Leading rank-one term of a planar matrix (zero if the matrix is zero).
PlanarMatrix leading_rank_one(const PlanarMatrix& d) {
  Eigen::JacobiSVD<PlanarMatrix> svd(d, Eigen::ComputeFullU | Eigen::ComputeFullV);
  return svd.singularValues()(0) * svd.matrixU().col(0) * svd.matrixV().col(0).transpose();
}

}  // namespace

std::vector<PlanarMatrix> laminate_seeds(const DensityModel& model) {
  if (model.kind != DensityKind::double_well) return {};
  const PlanarMatrix abar = model.shift.leftCols<2>();
  if (abar.norm() == 0.0) return {};
  Eigen::JacobiSVD<PlanarMatrix> svd(abar, Eigen::ComputeFullU | Eigen::ComputeFullV);
  std::vector<PlanarMatrix> seeds;
  for (int k = 0; k < 2; ++k) {
    const double s = svd.singularValues()(k);
    if (s > 1e-12 * svd.singularValues()(0))
      seeds.push_back(s * svd.matrixU().col(k) * svd.matrixV().col(k).transpose());
  }
  return seeds;
}

// ---------------------------------------------------------------------------
// Lamination

namespace {

using Inner = std::function<double(const PlanarMatrix&)>;

std::vector<PlanarMatrix> line_directions(int normals, bool all_amplitude_dirs,
                                          const std::vector<PlanarMatrix>& seeds) {
  static const std::array<std::array<double, 3>, 13> kHalfSphere{{{1, 0, 0},
                                                                  {0, 1, 0},
                                                                  {0, 0, 1},
                                                                  {1, 1, 0},
                                                                  {1, -1, 0},
                                                                  {1, 0, 1},
                                                                  {1, 0, -1},
                                                                  {0, 1, 1},
                                                                  {0, 1, -1},
                                                                  {1, 1, 1},
                                                                  {1, 1, -1},
                                                                  {1, -1, 1},
                                                                  {1, -1, -1}}};
  const int na = all_amplitude_dirs ? 13 : 3;
  std::vector<PlanarMatrix> out;
  for (const auto& s : seeds) {
    const PlanarMatrix r = leading_rank_one(s);
    if (r.norm() > 0.0) out.push_back(r / r.norm());
  }
  for (int j = 0; j < normals; ++j) {
    const double theta = M_PI * j / normals;
    const Vec2 n(std::cos(theta), std::sin(theta));
    for (int k = 0; k < na; ++k) {
      Vec3 a(kHalfSphere[k][0], kHalfSphere[k][1], kHalfSphere[k][2]);
      a.normalize();
      out.push_back(a * n.transpose());
    }
  }
  return out;
}

std::vector<double> amplitude_grid(int count, double lo, double hi) {
  std::vector<double> s(count);
  for (int j = 0; j < count; ++j)
    s[j] = count == 1 ? lo : lo * std::pow(hi / lo, static_cast<double>(j) / (count - 1));
  return s;
}

// Value of the two-point laminate with endpoints xibar + sp D and xibar + sm D
// (sp > 0 > sm) and barycenter xibar.
double chord(double sp, double fp, double sm, double fm) {
  return (-sm * fp + sp * fm) / (sp - sm);
}

struct Candidate {
  double value;
  int line;
  double sp, sm;
};

double chord_search(const Inner& inner, const PlanarMatrix& xibar, int normals, int amplitudes,
                    bool all_amplitude_dirs, const LaminationConfig& cfg, bool polish) {
  const auto lines = line_directions(normals, all_amplitude_dirs, cfg.seeds);
  const auto amps = amplitude_grid(amplitudes, cfg.amplitude_min, cfg.amplitude_max);
  const int m = static_cast<int>(amps.size());

  double best = inner(xibar);
  std::vector<Candidate> top;  // best few (line, sp, sm) for polishing
  std::vector<double> fp(m), fm(m);
  for (int l = 0; l < static_cast<int>(lines.size()); ++l) {
    const PlanarMatrix& d = lines[l];
    for (int j = 0; j < m; ++j) {
      fp[j] = inner(xibar + amps[j] * d);
      fm[j] = inner(xibar - amps[j] * d);
    }
    Candidate line_best{std::numeric_limits<double>::infinity(), l, 0.0, 0.0};
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) {
        const double c = chord(amps[i], fp[i], -amps[j], fm[j]);
        if (c < line_best.value) line_best = {c, l, amps[i], -amps[j]};
      }
    best = std::min(best, line_best.value);
    if (polish) {
      top.push_back(line_best);
      std::sort(top.begin(), top.end(),
                [](const Candidate& a, const Candidate& b) { return a.value < b.value; });
      if (top.size() > 3) top.pop_back();
    }
  }
  if (!polish || m < 2) return best;

  // Cyclic Brent refinement of the two amplitudes along the best lines.
  const double ratio = amps[1] / amps[0];
  const int bits = std::numeric_limits<double>::digits / 2;
  for (Candidate c : top) {
    const PlanarMatrix& d = lines[c.line];
    double fpv = inner(xibar + c.sp * d), fmv = inner(xibar + c.sm * d);
    for (int cycle = 0; cycle < 4; ++cycle) {
      auto by_sp = [&](double sp) { return chord(sp, inner(xibar + sp * d), c.sm, fmv); };
      auto rp = boost::math::tools::brent_find_minima(by_sp, c.sp / ratio, c.sp * ratio, bits);
      if (rp.second < chord(c.sp, fpv, c.sm, fmv)) {
        c.sp = rp.first;
        fpv = inner(xibar + c.sp * d);
      }
      auto by_sm = [&](double sm) { return chord(c.sp, fpv, sm, inner(xibar + sm * d)); };
      auto rm = boost::math::tools::brent_find_minima(by_sm, c.sm * ratio, c.sm / ratio, bits);
      if (rm.second < chord(c.sp, fpv, c.sm, fmv)) {
        c.sm = rm.first;
        fmv = inner(xibar + c.sm * d);
      }
    }
    best = std::min(best, chord(c.sp, fpv, c.sm, fmv));
  }
  return best;
}

double nested_value(const PlanarDensity& w0, const PlanarMatrix& xibar, int depth,
                    const LaminationConfig& cfg) {
  if (depth == 0) return w0(xibar);
  Inner inner = [&](const PlanarMatrix& p) { return nested_value(w0, p, depth - 1, cfg); };
  return chord_search(inner, xibar, cfg.nested_directions, cfg.nested_amplitudes, false, cfg,
                      false);
}

}  // namespace

EnvelopeEstimate quasiconvexify_lamination(const PlanarDensity& w0, const PlanarMatrix& xibar,
                                           int depth, const LaminationConfig& config) {
  if (depth < 0 || depth > config.max_depth)
    throw ConfigError(fmt::format("lamination depth {} outside [0, {}]", depth, config.max_depth));
  if (config.directions < 1 || config.amplitudes < 1 || !(config.amplitude_min > 0.0) ||
      !(config.amplitude_max >= config.amplitude_min))
    throw ConfigError("invalid lamination grid");
  if (!xibar.allFinite()) throw DomainError("lamination: non-finite matrix entry");

  EnvelopeEstimate out;
  out.method = EnvelopeMethod::lamination;
  out.resolution = depth;
  out.value = w0(xibar);
  for (int k = 1; k <= depth; ++k) {
    Inner inner = [&](const PlanarMatrix& p) { return nested_value(w0, p, k - 1, config); };
    out.value = std::min(out.value, chord_search(inner, xibar, config.directions,
                                                 config.amplitudes, true, config, config.polish));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Cell problem

namespace {

class CellFunctional final : public ceres::FirstOrderFunction {
 public:
  CellFunctional(const PlanarDensity& w0, const PlanarMatrix& xibar, int n)
      : w0_(w0), xibar_(xibar), n_(n), h_(1.0 / n) {}

  int NumParameters() const override { return 3 * (n_ - 1) * (n_ - 1); }

  bool Evaluate(const double* x, double* cost, double* gradient) const override {
    auto node = [&](int i, int j) -> Vec3 {
      if (i == 0 || j == 0 || i == n_ || j == n_) return Vec3::Zero();
      const double* p = x + 3 * ((i - 1) + (n_ - 1) * (j - 1));
      return Vec3(p[0], p[1], p[2]);
    };
    auto add_grad = [&](int i, int j, const Vec3& g) {
      if (i == 0 || j == 0 || i == n_ || j == n_) return;
      double* p = gradient + 3 * ((i - 1) + (n_ - 1) * (j - 1));
      p[0] += g[0];
      p[1] += g[1];
      p[2] += g[2];
    };
    if (gradient) std::fill(gradient, gradient + NumParameters(), 0.0);
    const double area = 1.0 / (static_cast<double>(n_) * n_);
    const double inv2h = 1.0 / (2.0 * h_);
    double total = 0.0;
    for (int j = 0; j < n_; ++j)
      for (int i = 0; i < n_; ++i) {
        const Vec3 p00 = node(i, j), p10 = node(i + 1, j), p01 = node(i, j + 1),
                   p11 = node(i + 1, j + 1);
        PlanarMatrix f = xibar_;
        f.col(0) += (p10 + p11 - p00 - p01) * inv2h;
        f.col(1) += (p01 + p11 - p00 - p10) * inv2h;
        const double w = w0_(f);
        if (!std::isfinite(w)) return false;
        total += area * w;
        if (gradient) {
          const PlanarMatrix g = area * w0_.grad(f);
          const Vec3 gx = g.col(0) * inv2h, gy = g.col(1) * inv2h;
          add_grad(i, j, -gx - gy);
          add_grad(i + 1, j, gx - gy);
          add_grad(i, j + 1, -gx + gy);
          add_grad(i + 1, j + 1, gx + gy);
        }
      }
    *cost = total;
    return std::isfinite(total);
  }

 private:
  const PlanarDensity& w0_;
  PlanarMatrix xibar_;
  int n_;
  double h_;
};

class CostLogger final : public ceres::IterationCallback {
 public:
  explicit CostLogger(std::vector<double>& log) : log_(log) {}
  ceres::CallbackReturnType operator()(const ceres::IterationSummary& s) override {
    log_.push_back(s.cost);
    return ceres::SOLVER_CONTINUE;
  }

 private:
  std::vector<double>& log_;
};

// Triangle wave of unit slope and period `period`, zero at multiples of the period.
double sawtooth(double s, double period) {
  double r = std::fmod(s, period);
  if (r < 0) r += period;
  return std::min(r, period - r);
}

std::vector<double> sawtooth_start(const PlanarMatrix& d, int n, int period_cells) {
  Eigen::JacobiSVD<PlanarMatrix> svd(d, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec3 a = svd.singularValues()(0) * svd.matrixU().col(0);
  const Vec2 nrm = svd.matrixV().col(0);
  const double h = 1.0 / n;
  // Period measured along n so that roughly `period_cells` cells fit in one tooth.
  const double period = period_cells * h * std::max(std::abs(nrm[0]), std::abs(nrm[1]));
  std::vector<double> x(3 * (n - 1) * (n - 1));
  for (int j = 1; j < n; ++j)
    for (int i = 1; i < n; ++i) {
      const double s = nrm[0] * i * h + nrm[1] * j * h;
      const Vec3 val = sawtooth(s, period) * a;
      double* p = x.data() + 3 * ((i - 1) + (n - 1) * (j - 1));
      p[0] = val[0];
      p[1] = val[1];
      p[2] = val[2];
    }
  return x;
}

}  // namespace

EnvelopeEstimate quasiconvexify_cell(const PlanarDensity& w0, const PlanarMatrix& xibar,
                                     int mesh_n, const CellConfig& config) {
  if (mesh_n < 2) throw ConfigError(fmt::format("cell mesh {} must be >= 2", mesh_n));
  if (!xibar.allFinite()) throw DomainError("cell problem: non-finite matrix entry");

  EnvelopeEstimate out;
  out.method = EnvelopeMethod::cell_problem;
  out.resolution = mesh_n;
  out.value = w0(xibar);  // phi = 0 is admissible

  std::vector<std::vector<double>> starts;
  starts.emplace_back(3 * (mesh_n - 1) * (mesh_n - 1), 0.0);
  for (const auto& seed : config.seeds) {
    if (seed.norm() == 0.0) continue;
    for (int period : {2, 4}) starts.push_back(sawtooth_start(seed, mesh_n, period));
  }

  ceres::GradientProblem problem(new CellFunctional(w0, xibar, mesh_n));
  ceres::GradientProblemSolver::Options options;
  options.max_num_iterations = config.max_iterations;
  options.gradient_tolerance = config.gradient_tolerance;
  options.function_tolerance = config.function_tolerance;
  options.parameter_tolerance = 1e-14;
  options.logging_type = ceres::SILENT;

  std::vector<double> log;
  CostLogger logger(log);
  options.callbacks.push_back(&logger);

  bool any_ok = false;
  for (auto& x : starts) {
    ceres::GradientProblemSolver::Summary summary;
    ceres::Solve(options, problem, x.data(), &summary);
    if (summary.termination_type == ceres::FAILURE || !std::isfinite(summary.final_cost)) continue;
    any_ok = true;
    out.value = std::min(out.value, summary.final_cost);
  }
  if (!any_ok) {
    throw NumericalError("cell problem: descent failed from every start", out.value, log);
  }
  return out;
}

EnvelopeEstimate EnvelopeEstimator::evaluate(const PlanarDensity& w0,
                                             const PlanarMatrix& xibar) const {
  switch (method) {
    case EnvelopeMethod::lamination: return quasiconvexify_lamination(w0, xibar, depth, lamination);
    case EnvelopeMethod::cell_problem: return quasiconvexify_cell(w0, xibar, mesh_n, cell);
    case EnvelopeMethod::closed_form: {
      EnvelopeEstimate e;
      e.value = w0(xibar);
      return e;
    }
  }
  throw ConfigError("unknown envelope method");
}

PlanarMatrix grad_qw0(const EnvelopeEstimator& estimator, const PlanarDensity& w0,
                      const PlanarMatrix& xibar, double h) {
  if (!(h >= estimator.h_floor))
    throw ConfigError(fmt::format("finite-difference step {} below floor {}", h, estimator.h_floor));
  PlanarMatrix g;
  for (int k = 0; k < 6; ++k) {
    PlanarMatrix plus = xibar, minus = xibar;
    plus(k) += h;
    minus(k) -= h;
    g(k) = (estimator.evaluate(w0, plus).value - estimator.evaluate(w0, minus).value) / (2.0 * h);
  }
  return g;
}

}  // namespace lamella

#include "lamella/table.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <thread>

#include <fmt/format.h>

#include "lamella/csv.hpp"
#include "lamella/errors.hpp"

namespace lamella {

namespace {

double& coord(PlanarMatrix& m, int axis) { return m(axis / 2, axis % 2); }
double coord(const PlanarMatrix& m, int axis) { return m(axis / 2, axis % 2); }

std::size_t total_size(const TableAxes& axes) {
  std::size_t n = 1;
  for (const auto& a : axes) n *= static_cast<std::size_t>(a.count);
  return n;
}

bool pinned_match(const TableAxis& a, double x) {
  return std::abs(x - a.lo) <= 1e-12 * (1.0 + std::abs(a.lo));
}

// Cell index and local coordinate of x on a non-pinned axis, or false if outside.
bool locate(const TableAxis& a, double x, int& cell, double& frac) {
  const double span = a.hi - a.lo;
  const double tol = 1e-12 * (1.0 + std::abs(span));
  if (x < a.lo - tol || x > a.hi + tol) return false;
  const double t = std::clamp((x - a.lo) / span, 0.0, 1.0) * (a.count - 1);
  cell = std::min(static_cast<int>(std::floor(t)), a.count - 2);
  frac = t - cell;
  return true;
}

}  // namespace

EnvelopeTable::EnvelopeTable(TableAxes axes, std::vector<double> values, EnvelopeMethod method,
                             int resolution, PlanarDensity fallback)
    : axes_(axes),
      values_(std::move(values)),
      method_(method),
      resolution_(resolution),
      fallback_(std::move(fallback)) {
  for (const auto& a : axes_) {
    if (a.count < 1) throw ConfigError("table axis count must be >= 1");
    if (a.count > 1 && !(a.hi > a.lo)) throw ConfigError("table axis needs hi > lo");
  }
  if (values_.size() != total_size(axes_))
    throw ConfigError(fmt::format("table has {} values for {} grid points", values_.size(),
                                  total_size(axes_)));
}

PlanarMatrix EnvelopeTable::point(std::size_t flat) const {
  PlanarMatrix m = PlanarMatrix::Zero();
  // Axis 5 varies fastest.
  for (int k = 5; k >= 0; --k) {
    const auto c = static_cast<std::size_t>(axes_[k].count);
    coord(m, k) = axes_[k].node(static_cast<int>(flat % c));
    flat /= c;
  }
  return m;
}

EnvelopeTable EnvelopeTable::build(const TableAxes& axes, const PlanarDensity& w0,
                                   const EnvelopeEstimator& estimator, int jobs) {
  const std::size_t n = total_size(axes);
  std::vector<double> values(n);
  EnvelopeTable shape(axes, std::vector<double>(n, 0.0), estimator.method, 0, w0);
  const int workers = std::max(1, std::min<int>(jobs, static_cast<int>(n)));
  auto work = [&](int id) {
    for (std::size_t k = id; k < n; k += workers)
      values[k] = estimator.evaluate(w0, shape.point(k)).value;
  };
  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (int id = 0; id < workers; ++id) pool.emplace_back(work, id);
    for (auto& t : pool) t.join();
  }
  const int resolution =
      estimator.method == EnvelopeMethod::cell_problem ? estimator.mesh_n : estimator.depth;
  return EnvelopeTable(axes, std::move(values), estimator.method, resolution, w0);
}

void EnvelopeTable::write(const std::filesystem::path& path) const {
  std::vector<std::string> header{"xibar_00", "xibar_01", "xibar_10", "xibar_11",
                                  "xibar_20", "xibar_21", "value",    "method",
                                  "resolution"};
  std::vector<std::vector<std::string>> rows;
  rows.reserve(values_.size());
  for (std::size_t k = 0; k < values_.size(); ++k) {
    const PlanarMatrix p = point(k);
    std::vector<std::string> row;
    for (int a = 0; a < 6; ++a) row.push_back(format_number(coord(p, a)));
    row.push_back(format_number(values_[k]));
    row.emplace_back(to_string(method_));
    row.push_back(std::to_string(resolution_));
    rows.push_back(std::move(row));
  }
  write_csv(path, header, rows);
}

EnvelopeTable EnvelopeTable::read(const std::filesystem::path& path, PlanarDensity fallback) {
  const CsvTable csv = read_csv(path);
  if (csv.rows.empty()) throw IoError(fmt::format("'{}': empty table", path.string()));
  std::array<int, 6> cols{};
  for (int a = 0; a < 6; ++a) cols[a] = csv.column(fmt::format("xibar_{}{}", a / 2, a % 2));
  const int vcol = csv.column("value");
  const int mcol = csv.column("method");
  const int rcol = csv.column("resolution");

  std::vector<std::array<double, 6>> pts;
  std::vector<double> vals;
  std::array<std::vector<double>, 6> uniq;
  try {
    for (const auto& row : csv.rows) {
      std::array<double, 6> p{};
      for (int a = 0; a < 6; ++a) {
        p[a] = std::stod(row[cols[a]]);
        uniq[a].push_back(p[a]);
      }
      pts.push_back(p);
      vals.push_back(std::stod(row[vcol]));
    }
  } catch (const std::logic_error&) {
    throw IoError(fmt::format("'{}': malformed number", path.string()));
  }

  TableAxes axes;
  for (int a = 0; a < 6; ++a) {
    auto& u = uniq[a];
    std::sort(u.begin(), u.end());
    u.erase(std::unique(u.begin(), u.end()), u.end());
    axes[a] = {u.front(), u.back(), static_cast<int>(u.size())};
  }
  if (total_size(axes) != vals.size())
    throw IoError(fmt::format("'{}': rows do not form a tensor grid", path.string()));

  std::vector<double> values(vals.size(), std::numeric_limits<double>::quiet_NaN());
  for (std::size_t r = 0; r < pts.size(); ++r) {
    std::size_t flat = 0;
    for (int a = 0; a < 6; ++a) {
      const auto& u = uniq[a];
      const auto it = std::lower_bound(u.begin(), u.end(), pts[r][a]);
      flat = flat * u.size() + static_cast<std::size_t>(it - u.begin());
    }
    values[flat] = vals[r];
  }
  // Re-derive the grid nodes to confirm uniform spacing.
  for (int a = 0; a < 6; ++a)
    for (int k = 0; k < axes[a].count; ++k)
      if (std::abs(axes[a].node(k) - uniq[a][k]) > 1e-9 * (1.0 + std::abs(uniq[a][k])))
        throw IoError(fmt::format("'{}': axis {} is not uniformly spaced", path.string(), a));

  const EnvelopeMethod method = envelope_method_from_string(csv.rows.front()[mcol]);
  const int resolution = std::stoi(csv.rows.front()[rcol]);
  return EnvelopeTable(axes, std::move(values), method, resolution, std::move(fallback));
}

bool EnvelopeTable::covers(const PlanarMatrix& xibar) const {
  for (int a = 0; a < 6; ++a) {
    const auto& ax = axes_[a];
    const double x = coord(xibar, a);
    if (ax.count == 1) {
      if (!pinned_match(ax, x)) return false;
    } else {
      int cell;
      double frac;
      if (!locate(ax, x, cell, frac)) return false;
    }
  }
  return true;
}

namespace {

struct Stencil {
  std::array<int, 6> cell{};
  std::array<double, 6> frac{};
  std::array<bool, 6> active{};
};

}  // namespace

double EnvelopeTable::value(const PlanarMatrix& xibar) const {
  if (!covers(xibar)) return fallback_(xibar);
  Stencil st;
  for (int a = 0; a < 6; ++a) {
    st.active[a] = axes_[a].count > 1;
    if (st.active[a]) locate(axes_[a], coord(xibar, a), st.cell[a], st.frac[a]);
  }
  double out = 0.0;
  for (int corner = 0; corner < 64; ++corner) {
    double weight = 1.0;
    std::size_t flat = 0;
    bool skip = false;
    for (int a = 0; a < 6; ++a) {
      const int bit = (corner >> a) & 1;
      int idx = 0;
      if (st.active[a]) {
        idx = st.cell[a] + bit;
        weight *= bit ? st.frac[a] : 1.0 - st.frac[a];
      } else if (bit) {
        skip = true;
        break;
      }
      flat = flat * axes_[a].count + idx;
    }
    if (skip || weight == 0.0) continue;
    out += weight * values_[flat];
  }
  return out;
}

PlanarMatrix EnvelopeTable::gradient(const PlanarMatrix& xibar) const {
  if (!covers(xibar)) return fallback_.grad(xibar);
  Stencil st;
  for (int a = 0; a < 6; ++a) {
    st.active[a] = axes_[a].count > 1;
    if (st.active[a]) locate(axes_[a], coord(xibar, a), st.cell[a], st.frac[a]);
  }
  const PlanarMatrix w0_grad = fallback_.grad(xibar);
  PlanarMatrix g = PlanarMatrix::Zero();
  for (int d = 0; d < 6; ++d) {
    if (!st.active[d]) {
      coord(g, d) = coord(w0_grad, d);
      continue;
    }
    const double h = (axes_[d].hi - axes_[d].lo) / (axes_[d].count - 1);
    double acc = 0.0;
    for (int corner = 0; corner < 64; ++corner) {
      double weight = 1.0;
      std::size_t flat = 0;
      bool skip = false;
      for (int a = 0; a < 6; ++a) {
        const int bit = (corner >> a) & 1;
        int idx = 0;
        if (st.active[a]) {
          idx = st.cell[a] + bit;
          if (a == d)
            weight *= bit ? 1.0 / h : -1.0 / h;
          else
            weight *= bit ? st.frac[a] : 1.0 - st.frac[a];
        } else if (bit) {
          skip = true;
          break;
        }
        flat = flat * axes_[a].count + idx;
      }
      if (skip || weight == 0.0) continue;
      acc += weight * values_[flat];
    }
    coord(g, d) = acc;
  }
  return g;
}

}  // namespace lamella

#include "lamella/grid.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <fmt/format.h>
#include <json.hpp>

#include "lamella/csv.hpp"
#include "lamella/errors.hpp"

namespace lamella {

void Grid::validate() const {
  if (nx < 2 || ny < 2) throw ConfigError(fmt::format("grid needs nx, ny >= 2 (got {}, {})", nx, ny));
  if (nz < 1) throw ConfigError("grid needs nz >= 1");
  if (frame < 1) throw ConfigError("grid frame width must be >= 1");
  if (!(lx > 0.0) || !(ly > 0.0)) throw ConfigError("grid side lengths must be positive");
  if (frame_sides > frame_all) throw ConfigError("invalid frame side mask");
}

double Grid::min_spacing() const {
  double h = std::min(hx(), hy());
  if (!planar()) h = std::min(h, hz());
  return h;
}

void Grid::node_ijk(int n, int& i, int& j, int& k) const {
  i = n % nodes_x();
  n /= nodes_x();
  j = n % nodes_y();
  k = n / nodes_y();
}

void Grid::cell_ijk(int c, int& i, int& j, int& k) const {
  i = c % cells_x();
  c /= cells_x();
  j = c % cells_y();
  k = c / cells_y();
}

Vec3 Grid::position(int n) const {
  int i, j, k;
  node_ijk(n, i, j, k);
  return Vec3((i - pad_left()) * hx(), (j - pad_bottom()) * hy(), planar() ? 0.0 : -1.0 + k * hz());
}

bool Grid::cell_in_omega(int c) const {
  int i, j, k;
  cell_ijk(c, i, j, k);
  return i >= pad_left() && i < pad_left() + nx && j >= pad_bottom() && j < pad_bottom() + ny;
}

bool Grid::dirichlet_node(int n) const {
  int i, j, k;
  node_ijk(n, i, j, k);
  if ((frame_sides & frame_left) && i <= pad_left()) return true;
  if ((frame_sides & frame_right) && i >= pad_left() + nx) return true;
  if ((frame_sides & frame_bottom) && j <= pad_bottom()) return true;
  if ((frame_sides & frame_top) && j >= pad_bottom() + ny) return true;
  return false;
}

Field::Field(const Grid& g, int comps, double fill)
    : grid(g), components(comps), values(Eigen::VectorXd::Constant(g.node_count() * comps, fill)) {
  if (comps != 1 && comps != 3) throw DomainError("field needs 1 or 3 components");
}

Field Field::from_function(const Grid& g, int comps,
                           const std::function<Eigen::VectorXd(const Vec3&)>& f) {
  Field out(g, comps);
  for (int n = 0; n < g.node_count(); ++n) {
    const Eigen::VectorXd val = f(g.position(n));
    for (int c = 0; c < comps; ++c) out.at(n, c) = val[c];
  }
  return out;
}

void Field::set_vec(int node, const Vec3& x) {
  for (int c = 0; c < 3; ++c) at(node, c) = x[c];
}

double Field::sup_norm() const {
  double s = 0.0;
  const int n = static_cast<int>(values.size()) / components;
  for (int k = 0; k < n; ++k) s = std::max(s, values.segment(k * components, components).norm());
  return s;
}

void Field::validate() const {
  if (values.size() != static_cast<Eigen::Index>(grid.node_count()) * components)
    throw DomainError("field size does not match its grid");
  if (!values.allFinite()) throw DomainError("field has non-finite values");
}

namespace {

std::filesystem::path sidecar(const std::filesystem::path& p) {
  auto s = p;
  s.replace_extension(".json");
  return s;
}

}  // namespace

void write_field(const std::filesystem::path& csv_path, const Field& f) {
  std::vector<std::string> header{"node_index", "x1", "x2", "x3"};
  for (int c = 0; c < f.components; ++c) header.push_back(fmt::format("c{}", c));
  std::vector<std::vector<std::string>> rows;
  rows.reserve(f.grid.node_count());
  for (int n = 0; n < f.grid.node_count(); ++n) {
    const Vec3 x = f.grid.position(n);
    std::vector<std::string> row{std::to_string(n), format_number(x[0]), format_number(x[1]),
                                 format_number(x[2])};
    for (int c = 0; c < f.components; ++c) row.push_back(format_number(f.at(n, c)));
    rows.push_back(std::move(row));
  }
  write_csv(csv_path, header, rows);

  const nlohmann::json meta{{"nx", f.grid.nx},       {"ny", f.grid.ny},
                            {"nz", f.grid.nz},       {"lx", f.grid.lx},
                            {"ly", f.grid.ly},       {"frame", f.grid.frame},
                            {"frame_sides", f.grid.frame_sides},
                            {"components", f.components},
                            {"nodes", f.grid.node_count()}};
  write_text(sidecar(csv_path), meta.dump(2) + "\n");
}

Field read_field(const std::filesystem::path& csv_path) {
  nlohmann::json meta;
  try {
    std::ifstream in(sidecar(csv_path));
    if (!in) throw IoError(fmt::format("missing sidecar for '{}'", csv_path.string()));
    meta = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(fmt::format("bad sidecar for '{}': {}", csv_path.string(), e.what()));
  }
  Grid g;
  g.nx = meta.at("nx");
  g.ny = meta.at("ny");
  g.nz = meta.at("nz");
  g.lx = meta.at("lx");
  g.ly = meta.at("ly");
  g.frame = meta.at("frame");
  g.frame_sides = meta.at("frame_sides");
  g.validate();
  Field f(g, meta.at("components").get<int>());
  const CsvTable csv = read_csv(csv_path);
  if (static_cast<int>(csv.rows.size()) != g.node_count())
    throw IoError(fmt::format("'{}': node count mismatch", csv_path.string()));
  for (const auto& row : csv.rows) {
    const int n = std::stoi(row[0]);
    for (int c = 0; c < f.components; ++c) f.at(n, c) = std::stod(row[4 + c]);
  }
  return f;
}

}  // namespace lamella

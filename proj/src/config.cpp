#include "lamella/config.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include <fmt/format.h>

#include "lamella/errors.hpp"

namespace lamella {

using nlohmann::json;

std::string_view to_string(Scenario s) {
  switch (s) {
    case Scenario::relax: return "relax";
    case Scenario::run2d: return "run2d";
    case Scenario::run3d: return "run3d";
    case Scenario::sweep: return "sweep";
    case Scenario::oracle1d: return "oracle1d";
    case Scenario::stability: return "stability";
  }
  return "?";
}

std::optional<Scenario> scenario_from_string(std::string_view name) {
  for (Scenario s : {Scenario::relax, Scenario::run2d, Scenario::run3d, Scenario::sweep,
                     Scenario::oracle1d, Scenario::stability})
    if (to_string(s) == name) return s;
  return std::nullopt;
}

json default_config() {
  return json{
      {"scenario", nullptr},
      {"seed", 0},
      {"jobs", 1},
      {"output_dir", "lamella-out"},
      {"model",
       {{"kind", "quadratic-isotropic"},
        {"name", nullptr},
        {"shift", nullptr},
        {"p", 2.0},
        {"kappa", 0.0},
        {"beta", nullptr},
        {"beta_prime", nullptr}}},
      {"envelope",
       {{"method", "lamination"},
        {"depth", 1},
        {"mesh_n", 8},
        {"h_floor", 1e-7},
        {"lamination",
         {{"directions", 32},
          {"amplitudes", 16},
          {"amplitude_min", 1e-3},
          {"amplitude_max", 10.0},
          {"max_depth", 3},
          {"nested_directions", 8},
          {"nested_amplitudes", 8},
          {"polish", true}}},
        {"cell", {{"max_iterations", 4000}, {"gradient_tolerance", 1e-11}, {"function_tolerance", 1e-13}}},
        {"table_axes", nullptr},
        {"table_path", nullptr}}},
      {"grid",
       {{"nx", 32},
        {"ny", 32},
        {"nz", 1},
        {"lx", 1.0},
        {"ly", 1.0},
        {"frame", 1},
        {"frame_sides", {"left", "right", "bottom", "top"}}}},
      {"phase",
       {{"enabled", true}, {"ell", 0.05}, {"eta", nullptr}, {"toughness", 1.0}, {"effective_toughness", false}}},
      {"program",
       {{"load", {{0.0, 0.0}, {0.0, 0.0}, {0.0, 0.0}}},
        {"amplitude", 0.0},
        {"direction", {0.0, 0.0, 0.0}},
        {"transverse", {0.0, 0.0, 0.0}},
        {"final_time", 1.0},
        {"steps", 10},
        {"sup_u_bound", nullptr}}},
      {"solver",
       {{"tol_alt", 1e-8},
        {"max_sweeps", 200},
        {"tol_inner", 1e-12},
        {"max_inner", 200},
        {"multistart", false},
        {"seeds", json::array()}}},
      {"eps", 0.1},
      {"eps_list", {0.2, 0.1, 0.05}},
      {"test_fields", 5},
      {"oracle1d",
       {{"n", 128},
        {"length", 1.0},
        {"toughness", 1.0},
        {"delta_min", 0.0},
        {"delta_max", 2.0},
        {"delta_count", 201},
        {"max_jumps", 1}}},
      {"stability", {{"competitors", 8}, {"tol_rel", 1e-6}}},
      {"checks", json::object()},
  };
}

namespace {

// Checks each scenario accepts, with their default tolerance.
const std::map<std::string, double>& check_defaults() {
  static const std::map<std::string, double> d{
      {"envelope_below_w0", 1e-9}, {"balance", 1e-3},   {"monotonicity", 0.0},
      {"horizontal_fraction", 0.05}, {"bulk_gap", 0.02}, {"pairing_gaps", 0.0},
      {"x3_invariance", 0.1},      {"critical_load", 0.1}, {"stability", 0.0},
  };
  return d;
}

const std::set<std::string>& checks_for(Scenario s) {
  static const std::map<Scenario, std::set<std::string>> m{
      {Scenario::relax, {"envelope_below_w0"}},
      {Scenario::run2d, {"balance", "monotonicity"}},
      {Scenario::run3d, {"balance", "monotonicity", "horizontal_fraction"}},
      {Scenario::sweep, {"bulk_gap", "pairing_gaps", "x3_invariance", "horizontal_fraction", "monotonicity"}},
      {Scenario::oracle1d, {"critical_load"}},
      {Scenario::stability, {"stability", "balance", "monotonicity"}},
  };
  return m.at(s);
}

std::string type_name(const json& j) {
  if (j.is_boolean()) return "boolean";
  if (j.is_number()) return "number";
  return j.type_name();
}

bool same_kind(const json& a, const json& b) {
  if (a.is_number() && b.is_number()) return true;
  return a.type() == b.type();
}

// Structural pass: unknown keys and type mismatches against the defaults.
// Records unknown keys and type mismatches, and drops them from `user` so the
// remaining checks still run against the defaults in their place.
void check_schema(json& user, const json& defaults, const std::string& path,
                  std::vector<std::string>& issues) {
  std::vector<std::string> dropped;
  for (auto it = user.begin(); it != user.end(); ++it) {
    const std::string key = path.empty() ? it.key() : path + "." + it.key();
    if (!defaults.contains(it.key())) {
      issues.push_back(fmt::format("{}: unknown key", key));
      dropped.push_back(it.key());
      continue;
    }
    const json& d = defaults.at(it.key());
    if (d.is_null() || key == "checks" || key == "solver.seeds") continue;  // checked later
    if (!same_kind(*it, d)) {
      issues.push_back(fmt::format("{}: expected {}, got {}", key, type_name(d), type_name(*it)));
      dropped.push_back(it.key());
      continue;
    }
    if (d.is_object()) check_schema(*it, d, key, issues);
  }
  for (const auto& k : dropped) user.erase(k);
}

void merge_into(json& base, const json& patch) {
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    if (base.contains(it.key()) && base[it.key()].is_object() && it->is_object() && it.key() != "checks")
      merge_into(base[it.key()], *it);
    else
      base[it.key()] = *it;
  }
}

// Typed reads that record a problem instead of throwing.
class Reader {
 public:
  explicit Reader(std::vector<std::string>& issues) : issues_(issues) {}

  double number(const json& j, const std::string& path) {
    if (!j.is_number()) return fail(path, "expected a number"), 0.0;
    const double x = j.get<double>();
    if (!std::isfinite(x)) return fail(path, "must be finite"), 0.0;
    return x;
  }
  int integer(const json& j, const std::string& path) {
    if (!j.is_number_integer()) return fail(path, "expected an integer"), 0;
    return j.get<int>();
  }
  double positive(const json& j, const std::string& path) {
    const double x = number(j, path);
    if (j.is_number() && !(x > 0.0)) fail(path, fmt::format("must be > 0 (got {})", x));
    return x;
  }
  int at_least(const json& j, const std::string& path, int lo) {
    const int x = integer(j, path);
    if (j.is_number_integer() && x < lo) fail(path, fmt::format("must be >= {} (got {})", lo, x));
    return x;
  }
  std::vector<double> numbers(const json& j, const std::string& path, std::size_t n = 0) {
    std::vector<double> out;
    if (!j.is_array()) return fail(path, "expected an array of numbers"), out;
    if (n && j.size() != n) return fail(path, fmt::format("expected {} entries", n)), out;
    for (std::size_t k = 0; k < j.size(); ++k) out.push_back(number(j[k], fmt::format("{}[{}]", path, k)));
    return out;
  }
  // Row-major nested arrays, rows x cols.
  std::optional<Eigen::MatrixXd> matrix(const json& j, const std::string& path, int rows, int cols) {
    if (!j.is_array() || static_cast<int>(j.size()) != rows)
      return fail(path, fmt::format("expected a {}x{} nested array", rows, cols)), std::nullopt;
    Eigen::MatrixXd m(rows, cols);
    for (int r = 0; r < rows; ++r) {
      const auto row = numbers(j[r], fmt::format("{}[{}]", path, r), cols);
      if (static_cast<int>(row.size()) != cols) return std::nullopt;
      for (int c = 0; c < cols; ++c) m(r, c) = row[c];
    }
    return m;
  }
  void fail(const std::string& path, const std::string& msg) { issues_.push_back(path + ": " + msg); }

 private:
  std::vector<std::string>& issues_;
};

// Runs a validate() call and files its ConfigError under `path`.
template <class F>
void guarded(std::vector<std::string>& issues, const std::string& path, F&& f) {
  try {
    f();
  } catch (const ConfigError& e) {
    issues.push_back(path + ": " + e.what());
  } catch (const DomainError& e) {
    issues.push_back(path + ": " + e.what());
  }
}

DensityModel read_model(const json& j, Reader& r, std::vector<std::string>& issues) {
  DensityModel m;
  const std::string kind = j.at("kind").get<std::string>();
  try {
    m.kind = density_kind_from_string(kind);
  } catch (const std::exception&) {
    r.fail("model.kind", fmt::format("unknown density kind '{}'", kind));
    return m;
  }
  m.name = j.at("name").is_string() ? j.at("name").get<std::string>() : std::string(to_string(m.kind));
  if (!j.at("name").is_null() && !j.at("name").is_string()) r.fail("model.name", "expected a string");
  m.p = r.number(j.at("p"), "model.p");
  m.kappa = r.number(j.at("kappa"), "model.kappa");
  if (!j.at("shift").is_null())
    if (auto s = r.matrix(j.at("shift"), "model.shift", 3, 3)) m.shift = *s;
  m.beta = j.at("beta").is_null() ? default_beta(m) : r.number(j.at("beta"), "model.beta");
  m.beta_prime =
      j.at("beta_prime").is_null() ? default_beta_prime(m) : r.number(j.at("beta_prime"), "model.beta_prime");
  guarded(issues, "model", [&] { m.validate(); });
  return m;
}

}  // namespace

ExperimentConfig parse_config_json(const json& doc_in, const ConfigOverrides& ov) {
  std::vector<std::string> issues;
  if (!doc_in.is_object()) throw ValidationError({"config root must be a JSON object"});
  json doc = doc_in;

  // Scenario: the subcommand wins, but a contradicting file is an error.
  if (ov.scenario) {
    if (doc.contains("scenario") && doc["scenario"].is_string() &&
        doc["scenario"].get<std::string>() != to_string(*ov.scenario))
      issues.push_back(fmt::format("scenario: config says '{}' but the command is '{}'",
                                   doc["scenario"].get<std::string>(), to_string(*ov.scenario)));
    doc["scenario"] = std::string(to_string(*ov.scenario));
  }
  if (ov.output_dir) doc["output_dir"] = ov.output_dir->string();
  if (ov.jobs) doc["jobs"] = *ov.jobs;
  if (ov.seed) doc["seed"] = *ov.seed;

  const json defaults = default_config();
  check_schema(doc, defaults, "", issues);
  json m = defaults;
  merge_into(m, doc);

  Reader r(issues);
  ExperimentConfig c;

  if (!m["scenario"].is_string()) {
    r.fail("scenario", "missing (one of relax, run2d, run3d, sweep, oracle1d, stability)");
  } else if (auto s = scenario_from_string(m["scenario"].get<std::string>())) {
    c.scenario = *s;
  } else {
    r.fail("scenario", fmt::format("unknown scenario '{}'", m["scenario"].get<std::string>()));
  }
  if (!m["seed"].is_number_integer() || (!m["seed"].is_number_unsigned() && m["seed"].get<long long>() < 0))
    r.fail("seed", "expected a non-negative integer");
  else c.seed = m["seed"].get<std::uint64_t>();
  c.jobs = r.at_least(m["jobs"], "jobs", 1);
  c.output_dir = m["output_dir"].get<std::string>();

  c.model = read_model(m["model"], r, issues);

  // Envelope estimator.
  const json& e = m["envelope"];
  try {
    c.estimator.method = envelope_method_from_string(e["method"].get<std::string>());
  } catch (const std::exception&) {
    r.fail("envelope.method", fmt::format("unknown method '{}'", e["method"].get<std::string>()));
  }
  c.estimator.depth = r.at_least(e["depth"], "envelope.depth", 0);
  c.estimator.mesh_n = r.at_least(e["mesh_n"], "envelope.mesh_n", 2);
  c.estimator.h_floor = r.positive(e["h_floor"], "envelope.h_floor");
  const json& lam = e["lamination"];
  auto& lc = c.estimator.lamination;
  lc.directions = r.at_least(lam["directions"], "envelope.lamination.directions", 1);
  lc.amplitudes = r.at_least(lam["amplitudes"], "envelope.lamination.amplitudes", 1);
  lc.amplitude_min = r.positive(lam["amplitude_min"], "envelope.lamination.amplitude_min");
  lc.amplitude_max = r.positive(lam["amplitude_max"], "envelope.lamination.amplitude_max");
  if (lc.amplitude_max < lc.amplitude_min) r.fail("envelope.lamination.amplitude_max", "below amplitude_min");
  lc.max_depth = r.at_least(lam["max_depth"], "envelope.lamination.max_depth", 0);
  lc.nested_directions = r.at_least(lam["nested_directions"], "envelope.lamination.nested_directions", 1);
  lc.nested_amplitudes = r.at_least(lam["nested_amplitudes"], "envelope.lamination.nested_amplitudes", 1);
  lc.polish = lam["polish"].get<bool>();
  if (c.estimator.depth > lc.max_depth)
    r.fail("envelope.depth", fmt::format("exceeds lamination.max_depth {}", lc.max_depth));
  const json& cell = e["cell"];
  c.estimator.cell.max_iterations = r.at_least(cell["max_iterations"], "envelope.cell.max_iterations", 1);
  c.estimator.cell.gradient_tolerance = r.positive(cell["gradient_tolerance"], "envelope.cell.gradient_tolerance");
  c.estimator.cell.function_tolerance = r.positive(cell["function_tolerance"], "envelope.cell.function_tolerance");
  if (c.model.kind == DensityKind::double_well) {
    try {
      lc.seeds = laminate_seeds(c.model);
      c.estimator.cell.seeds = lc.seeds;
    } catch (const std::exception&) {
      // the model error is already on file
    }
  }
  if (!e["table_axes"].is_null()) {
    if (auto ax = r.matrix(e["table_axes"], "envelope.table_axes", 6, 3)) {
      TableAxes axes;
      for (int k = 0; k < 6; ++k) {
        axes[k].lo = (*ax)(k, 0);
        axes[k].hi = (*ax)(k, 1);
        const double cnt = (*ax)(k, 2);
        if (cnt != std::floor(cnt) || cnt < 1)
          r.fail(fmt::format("envelope.table_axes[{}]", k), "count must be a positive integer");
        axes[k].count = static_cast<int>(cnt);
        if (axes[k].count > 1 && !(axes[k].hi > axes[k].lo))
          r.fail(fmt::format("envelope.table_axes[{}]", k), "needs hi > lo when count > 1");
      }
      c.table_axes = axes;
    }
  }
  if (!e["table_path"].is_null()) {
    if (!e["table_path"].is_string()) r.fail("envelope.table_path", "expected a string");
    else c.table_path = e["table_path"].get<std::string>();
  }

  // Grid.
  const json& g = m["grid"];
  c.grid.nx = r.at_least(g["nx"], "grid.nx", 2);
  c.grid.ny = r.at_least(g["ny"], "grid.ny", 2);
  c.grid.nz = r.at_least(g["nz"], "grid.nz", 1);
  c.grid.lx = r.positive(g["lx"], "grid.lx");
  c.grid.ly = r.positive(g["ly"], "grid.ly");
  c.grid.frame = r.at_least(g["frame"], "grid.frame", 1);
  c.grid.frame_sides = 0;
  for (const auto& side : g["frame_sides"]) {
    const std::string s = side.is_string() ? side.get<std::string>() : "";
    if (s == "left") c.grid.frame_sides |= frame_left;
    else if (s == "right") c.grid.frame_sides |= frame_right;
    else if (s == "bottom") c.grid.frame_sides |= frame_bottom;
    else if (s == "top") c.grid.frame_sides |= frame_top;
    else r.fail("grid.frame_sides", fmt::format("unknown side {}", side.dump()));
  }

  // Phase field.
  const json& ph = m["phase"];
  c.phase.enabled = ph["enabled"].get<bool>();
  c.phase.ell = r.positive(ph["ell"], "phase.ell");
  c.phase.toughness = r.positive(ph["toughness"], "phase.toughness");
  c.phase.effective_toughness = ph["effective_toughness"].get<bool>();
  if (!ph["eta"].is_null()) {
    c.phase.eta = r.number(ph["eta"], "phase.eta");
    if (c.phase.eta < 0.0) r.fail("phase.eta", "must be >= 0");
  }

  // Boundary program.
  const json& pr = m["program"];
  if (auto l = r.matrix(pr["load"], "program.load", 3, 2)) c.program.load = *l;
  c.program.amplitude = r.number(pr["amplitude"], "program.amplitude");
  const auto dir = r.numbers(pr["direction"], "program.direction", 3);
  if (dir.size() == 3) c.program.direction = Vec3(dir[0], dir[1], dir[2]);
  const auto h = r.numbers(pr["transverse"], "program.transverse", 3);
  if (h.size() == 3) c.program.transverse = Vec3(h[0], h[1], h[2]);
  c.program.final_time = r.positive(pr["final_time"], "program.final_time");
  c.program.steps = r.at_least(pr["steps"], "program.steps", 1);
  if (!pr["sup_u_bound"].is_null()) c.program.sup_u_bound = r.positive(pr["sup_u_bound"], "program.sup_u_bound");

  // Solver.
  const json& so = m["solver"];
  c.solver.tol_alt = r.positive(so["tol_alt"], "solver.tol_alt");
  c.solver.max_sweeps = r.at_least(so["max_sweeps"], "solver.max_sweeps", 1);
  c.solver.tol_inner = r.positive(so["tol_inner"], "solver.tol_inner");
  c.solver.max_inner = r.at_least(so["max_inner"], "solver.max_inner", 1);
  c.solver.multistart = so["multistart"].get<bool>();
  if (!so["seeds"].is_array()) {
    r.fail("solver.seeds", "expected an array of {axis, position}");
  } else {
    for (std::size_t k = 0; k < so["seeds"].size(); ++k) {
      const json& s = so["seeds"][k];
      const std::string path = fmt::format("solver.seeds[{}]", k);
      if (!s.is_object() || !s.contains("axis") || !s.contains("position") || s.size() != 2) {
        r.fail(path, "expected exactly the keys axis and position");
        continue;
      }
      CrackSeed cs;
      cs.axis = r.integer(s["axis"], path + ".axis");
      cs.position = r.number(s["position"], path + ".position");
      if (cs.axis < 0 || cs.axis > 2) r.fail(path + ".axis", "must be 0, 1 or 2");
      c.solver.seeds.push_back(cs);
    }
  }

  c.eps = r.positive(m["eps"], "eps");
  c.eps_list = r.numbers(m["eps_list"], "eps_list");
  c.test_fields = r.at_least(m["test_fields"], "test_fields", 0);

  const json& o = m["oracle1d"];
  c.oracle.n = r.at_least(o["n"], "oracle1d.n", 2);
  c.oracle.length = r.positive(o["length"], "oracle1d.length");
  c.oracle.toughness = r.positive(o["toughness"], "oracle1d.toughness");
  const double dmin = r.number(o["delta_min"], "oracle1d.delta_min");
  const double dmax = r.number(o["delta_max"], "oracle1d.delta_max");
  const int dcount = r.at_least(o["delta_count"], "oracle1d.delta_count", 1);
  if (dmax < dmin) r.fail("oracle1d.delta_max", "below delta_min");
  for (int k = 0; k < dcount; ++k) c.deltas.push_back(dcount == 1 ? dmin : dmin + (dmax - dmin) * k / (dcount - 1));
  c.max_jumps = r.at_least(o["max_jumps"], "oracle1d.max_jumps", 0);
  if (c.max_jumps > c.oracle.n - 1) r.fail("oracle1d.max_jumps", fmt::format("must be <= n - 1 = {}", c.oracle.n - 1));

  const json& st = m["stability"];
  c.competitors = r.at_least(st["competitors"], "stability.competitors", 1);
  c.stability_tol = r.positive(st["tol_rel"], "stability.tol_rel");

  // Scenario-specific requirements.
  const bool needs_table = c.model.kind == DensityKind::double_well && !c.table_axes && !c.table_path;
  switch (c.scenario) {
    case Scenario::relax:
      if (!c.table_axes) r.fail("envelope.table_axes", "relax needs the table grid");
      break;
    case Scenario::run2d:
      if (c.grid.nz != 1) r.fail("grid.nz", "run2d works on the midsurface grid (nz = 1)");
      if (needs_table) r.fail("envelope", "double-well in 2D needs table_axes or table_path");
      break;
    case Scenario::run3d:
      if (c.grid.nz < 2) r.fail("grid.nz", "run3d needs nz >= 2");
      break;
    case Scenario::sweep: {
      if (c.grid.nz < 2) r.fail("grid.nz", "sweep needs nz >= 2");
      if (needs_table) r.fail("envelope", "double-well sweep needs table_axes or table_path for the limit");
      bool ok = c.eps_list.size() >= 2;
      for (std::size_t k = 0; k < c.eps_list.size(); ++k)
        ok = ok && c.eps_list[k] > 0.0 && (k == 0 || c.eps_list[k] < c.eps_list[k - 1]);
      if (!ok) r.fail("eps_list", "needs >= 2 positive, strictly decreasing values");
      break;
    }
    case Scenario::oracle1d:
      break;
    case Scenario::stability:
      if (c.grid.planar() && needs_table) r.fail("envelope", "double-well in 2D needs table_axes or table_path");
      break;
  }
  for (const auto& s : c.solver.seeds)
    if (s.axis == 2 && c.grid.planar() && c.scenario != Scenario::sweep)
      r.fail("solver.seeds", "axis 2 seeds need a 3D grid");
  // Checks: true, {} or {"tol": x}; false drops the check.
  json resolved_checks = json::object();
  if (!m["checks"].is_object()) {
    r.fail("checks", "expected an object");
  } else {
    for (auto it = m["checks"].begin(); it != m["checks"].end(); ++it) {
      const std::string path = "checks." + it.key();
      const auto d = check_defaults().find(it.key());
      if (d == check_defaults().end()) {
        r.fail(path, "unknown check");
        continue;
      }
      if (!checks_for(c.scenario).count(it.key())) {
        r.fail(path, fmt::format("not available for scenario {}", to_string(c.scenario)));
        continue;
      }
      if (it->is_boolean()) {
        if (it->get<bool>()) c.checks[it.key()] = {d->second};
      } else if (it->is_object()) {
        CheckSpec spec{d->second};
        for (auto f = it->begin(); f != it->end(); ++f) {
          if (f.key() != "tol") r.fail(path + "." + f.key(), "unknown key");
          else spec.tol = r.positive(*f, path + ".tol");
        }
        c.checks[it.key()] = spec;
      } else {
        r.fail(path, "expected true, false or {\"tol\": x}");
      }
    }
  }
  for (const auto& [name, spec] : c.checks) resolved_checks[name] = {{"tol", spec.tol}};

  if (!issues.empty()) throw ValidationError(issues);

  // Cross-object validation that only makes sense once every field parsed.
  guarded(issues, "grid", [&] { c.grid.validate(); });
  guarded(issues, "program", [&] { c.program.validate(); });
  guarded(issues, "oracle1d", [&] { c.oracle.validate(); });
  if (!issues.empty()) throw ValidationError(issues);

  m["checks"] = resolved_checks;
  m["model"]["name"] = c.model.name;
  m["model"]["beta"] = c.model.beta;
  m["model"]["beta_prime"] = c.model.beta_prime;
  if (m["model"]["shift"].is_null()) m["model"]["shift"] = {{0.0, 0.0, 0.0}, {0.0, 0.0, 0.0}, {0.0, 0.0, 0.0}};
  m["phase"]["eta"] = c.phase.eta_value();
  c.resolved = m;
  return c;
}

ExperimentConfig parse_config(const std::filesystem::path& path, const ConfigOverrides& overrides) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot open config '{}'", path.string()));
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw IoError(fmt::format("config '{}' is not valid JSON: {}", path.string(), e.what()));
  }
  return parse_config_json(doc, overrides);
}

}  // namespace lamella

#include "lamella/execute.hpp"

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

#include <fmt/format.h>
#include <json.hpp>

#include "lamella/csv.hpp"
#include "lamella/errors.hpp"
#include "lamella/log.hpp"
#include "lamella/reduction.hpp"

namespace lamella {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// NaN is not valid JSON; failed members are reported as null.
json num(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

json nums(const std::vector<double>& xs) {
  json a = json::array();
  for (double x : xs) a.push_back(num(x));
  return a;
}

// Strict decrease, except that values already at roundoff (<= floor) count as converged.
bool strictly_decreasing(const std::vector<double>& v, double floor = 0.0) {
  for (std::size_t k = 1; k < v.size(); ++k)
    if (!(v[k] < v[k - 1]) && !(v[k] <= floor)) return false;
  return !v.empty();
}

constexpr double kRoundoff = 1e-12;

class Outputs {
 public:
  explicit Outputs(const ExperimentConfig& c) : cfg_(c) {
    fs::path out = fs::absolute(c.output_dir);
    if (out.filename().empty()) out = out.parent_path();
    final_ = out;
    tmp_ = out.parent_path() / fmt::format(".{}.tmp-{}", out.filename().string(), ::getpid());
    std::error_code ec;
    fs::remove_all(tmp_, ec);
    fs::create_directories(tmp_, ec);
    if (ec) throw IoError(fmt::format("cannot create '{}': {}", tmp_.string(), ec.message()));
  }
  ~Outputs() {
    if (!committed_) {
      std::error_code ec;
      fs::remove_all(tmp_, ec);
    }
  }

  fs::path path(const fs::path& rel) const {
    const fs::path p = tmp_ / rel;
    fs::create_directories(p.parent_path());
    return p;
  }

  json& summary() { return summary_; }

  void check(const std::string& name, double value, bool pass) {
    summary_["checks"][name] = {{"value", num(value)}, {"tol", cfg_.checks.at(name).tol}, {"pass", pass}};
    if (!pass) failed_ = true;
    log_info(fmt::format("check {}: {} ({})", name, pass ? "pass" : "FAIL", value));
  }
  bool wants(const std::string& name) const { return cfg_.checks.count(name) > 0; }
  void mark_partial() { partial_ = true; }

  // Writes the bookkeeping files and moves the directory into place.
  int commit(const std::string& plot) {
    summary_["scenario"] = std::string(to_string(cfg_.scenario));
    summary_["seed"] = cfg_.seed;
    summary_["partial"] = partial_;
    if (!summary_.contains("checks")) summary_["checks"] = json::object();
    const int status = failed_ || partial_ ? exit_check_failed : exit_ok;
    summary_["status"] = status == exit_ok ? "ok" : "check_failed";
    write_text(tmp_ / "resolved_config.json", cfg_.resolved.dump(2) + "\n");
    write_text(tmp_ / "summary.json", summary_.dump(2) + "\n");
    write_text(tmp_ / "plot.gp", plot);

    std::error_code ec;
    fs::path old;
    if (fs::exists(final_)) {
      old = final_.parent_path() / fmt::format(".{}.old-{}", final_.filename().string(), ::getpid());
      fs::rename(final_, old, ec);
      if (ec) throw IoError(fmt::format("cannot move old '{}': {}", final_.string(), ec.message()));
    }
    fs::rename(tmp_, final_, ec);
    if (ec) throw IoError(fmt::format("cannot move outputs to '{}': {}", final_.string(), ec.message()));
    committed_ = true;
    if (!old.empty()) fs::remove_all(old, ec);
    return status;
  }

 private:
  const ExperimentConfig& cfg_;
  fs::path final_, tmp_;
  json summary_ = json::object();
  bool failed_ = false, partial_ = false, committed_ = false;
};

const char* kPlotHeader =
    "# gnuplot script; run from this directory: gnuplot -p plot.gp\n"
    "set datafile separator ','\n"
    "set key autotitle columnhead\n";

std::string trace_plot(const std::string& file) {
  return fmt::format(
      "{}set xlabel 't'\nset ylabel 'energy'\n"
      "plot '{}' using 1:2 with lines title 'bulk', \\\n"
      "     '' using 1:3 with lines title 'surface', \\\n"
      "     '' using 1:4 with lines title 'total', \\\n"
      "     '' using 1:6 with lines dashtype 2 title 'work'\n",
      kPlotHeader, file);
}

std::shared_ptr<const EnvelopeTable> load_table(const ExperimentConfig& c, Outputs* out) {
  if (c.table_path)
    return std::make_shared<EnvelopeTable>(EnvelopeTable::read(*c.table_path, make_w0(c.model)));
  if (!c.table_axes) return nullptr;
  log_info("building envelope table");
  auto t = std::make_shared<EnvelopeTable>(
      EnvelopeTable::build(*c.table_axes, make_w0(c.model), c.estimator, c.jobs));
  if (out) t->write(out->path("envelope_table.csv"));
  return t;
}

EvolutionProblem make_problem(const ExperimentConfig& c, Outputs& out) {
  EvolutionProblem pb;
  pb.grid = c.grid;
  pb.phase = c.phase;
  pb.program = c.program;
  pb.options = c.solver;
  if (c.grid.planar()) {
    pb.eps = 0.0;
    pb.density = make_limit_density(c.model, c.model.kind == DensityKind::double_well ? load_table(c, &out) : nullptr);
  } else {
    pb.eps = c.eps;
    pb.density = make_bulk_density(c.model);
  }
  return pb;
}

void write_trace(Outputs& out, const EvolutionTrace& tr, const fs::path& dir) {
  tr.write_csv(out.path(dir / "trace.csv"));
  write_field(out.path(dir / "fields" / "u_final.csv"), tr.final_state.u);
  write_field(out.path(dir / "fields" / "v_final.csv"), tr.final_state.v);
}

json trace_summary(const EvolutionTrace& tr) {
  const auto& r = tr.rows.back();
  double worst = 0.0;
  for (const auto& row : tr.rows) worst = std::max(worst, std::abs(row.residual));
  return {{"t", r.t},           {"bulk", r.bulk},          {"surface", r.surface},
          {"total", r.total},   {"work", r.work_cum},      {"residual", r.residual},
          {"max_abs_residual", worst}, {"sup_u", r.sup_u}};
}

void balance_check(Outputs& out, const ExperimentConfig& c, const EvolutionTrace& tr) {
  if (!out.wants("balance")) return;
  // Relative to the terminal total energy.
  const auto& r = tr.rows.back();
  out.check("balance", std::abs(r.residual) / std::max(std::abs(r.total), 1e-300),
            std::abs(r.residual) <= c.checks.at("balance").tol * std::abs(r.total) + 1e-14);
}

void monotonicity_check(Outputs& out, const std::vector<std::vector<Field>>& checkpoints) {
  if (!out.wants("monotonicity")) return;
  const auto v = crack_monotonicity_audit(checkpoints);
  out.check("monotonicity", static_cast<double>(v.size()), v.empty());
}

int run_relax(const ExperimentConfig& c) {
  Outputs out(c);
  const auto table = load_table(c, &out);
  if (c.table_path) table->write(out.path("envelope_table.csv"));  // built tables are already written
  const auto w0 = make_w0(c.model);
  double excess = -std::numeric_limits<double>::infinity(), lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (std::size_t k = 0; k < table->size(); ++k) {
    const double v = table->values()[k];
    excess = std::max(excess, v - w0(table->point(k)));
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  out.summary()["table"] = {{"points", table->size()},
                            {"method", std::string(to_string(table->method()))},
                            {"resolution", table->resolution()},
                            {"min", lo},
                            {"max", hi},
                            {"max_excess_over_w0", excess}};
  if (out.wants("envelope_below_w0"))
    out.check("envelope_below_w0", excess, excess <= c.checks.at("envelope_below_w0").tol);
  return out.commit(fmt::format("{}set xlabel 'table point'\nset ylabel 'QW_0'\n"
                                "plot 'envelope_table.csv' using 0:7 with points title 'value'\n",
                                kPlotHeader));
}

int run_single(const ExperimentConfig& c) {
  Outputs out(c);
  const auto pb = make_problem(c, out);
  const auto tr = run_evolution(pb);
  write_trace(out, tr, "");
  out.summary()["final"] = trace_summary(tr);
  if (!pb.grid.planar()) {
    out.summary()["x3_invariance"] = x3_invariance(tr.final_state.v);
    out.summary()["horizontal_fraction"] =
        pb.phase.enabled ? horizontal_fraction(tr.final_state.v, pb.eps, pb.phase) : 0.0;
  }
  balance_check(out, c, tr);
  monotonicity_check(out, {tr.v_checkpoints});
  if (out.wants("horizontal_fraction")) {
    const double f = out.summary()["horizontal_fraction"];
    out.check("horizontal_fraction", f, f <= c.checks.at("horizontal_fraction").tol);
  }
  return out.commit(trace_plot("trace.csv"));
}

int run_stability(const ExperimentConfig& c) {
  Outputs out(c);
  const auto pb = make_problem(c, out);
  const auto tr = run_evolution(pb);
  write_trace(out, tr, "");
  out.summary()["final"] = trace_summary(tr);
  const auto rep = stability_check(pb, tr.final_state, c.competitors, c.seed, c.stability_tol);
  out.summary()["stability"] = {{"passed", rep.passed},
                                {"energy", rep.energy},
                                {"min_gap", rep.min_gap},
                                {"competitors", rep.competitors},
                                {"worst", rep.worst}};
  if (out.wants("stability")) out.check("stability", rep.min_gap, rep.passed);
  balance_check(out, c, tr);
  monotonicity_check(out, {tr.v_checkpoints});
  return out.commit(trace_plot("trace.csv"));
}

int run_sweep_scenario(const ExperimentConfig& c) {
  Outputs out(c);
  SweepConfig s;
  s.model = c.model;
  s.grid = c.grid;
  s.phase = c.phase;
  s.program = c.program;
  s.options = c.solver;
  s.eps_list = c.eps_list;
  s.jobs = c.jobs;
  if (c.model.kind == DensityKind::double_well) s.table = load_table(c, &out);
  for (int k = 0; k < c.test_fields; ++k) s.test_fields.push_back(TestField::random(c.seed + k));
  const auto rep = run_sweep(s);
  if (rep.partial) out.mark_partial();

  json members = json::array();
  std::string plot = fmt::format("{}set xlabel 't'\nset ylabel 'total energy'\nplot ", kPlotHeader);
  for (std::size_t k = 0; k < rep.members.size(); ++k) {
    const auto& m = rep.members[k];
    const fs::path dir = fmt::format("members/eps_{}", k);
    json jm{{"eps", m.eps}, {"dir", dir.string()}};
    if (m.trace) {
      write_trace(out, *m.trace, dir);
      jm["final"] = trace_summary(*m.trace);
      jm["x3_invariance"] = m.x3_inv;
      jm["horizontal_fraction"] = m.horizontal_fraction;
      jm["pairings"] = nums(m.pairings);
      plot += fmt::format("'{}/trace.csv' using 1:4 with lines title 'eps = {}', \\\n     ",
                          dir.string(), m.eps);
    } else {
      jm["error"] = m.error;
    }
    members.push_back(jm);
  }
  out.summary()["members"] = members;
  if (rep.limit) {
    write_trace(out, *rep.limit, "limit");
    out.summary()["limit"] = trace_summary(*rep.limit);
    out.summary()["limit"]["pairings"] = nums(rep.limit_pairings);
    plot += "'limit/trace.csv' using 1:4 with lines lw 2 title 'limit'\n";
  } else {
    plot += "1/0 notitle\n";
  }

  std::vector<std::vector<std::string>> rows;
  for (const auto& r : rep.metrics)
    rows.push_back({format_number(r.t), format_number(r.eps), format_number(r.bulk_gap),
                    format_number(r.surface_gap), format_number(r.total_gap), format_number(r.x3_inv)});
  write_csv(out.path("metrics.csv"), {"t", "eps", "bulk_gap", "surface_gap", "total_gap", "x3_inv"}, rows);

  const auto bulk = rep.terminal_bulk_gaps();
  const auto pg = rep.pairing_gaps();
  out.summary()["terminal_gaps"] = {{"bulk", nums(bulk)},
                                    {"surface", nums(rep.terminal_surface_gaps())},
                                    {"total", nums(rep.terminal_total_gaps())}};
  json jpg = json::array();
  for (const auto& row : pg) jpg.push_back(nums(row));
  out.summary()["terminal_gaps"]["pairing"] = jpg;

  if (out.wants("bulk_gap")) {
    const double ref = rep.limit ? std::abs(rep.limit->rows.back().bulk) : kNaN;
    const double rel = bulk.empty() ? kNaN : bulk.back() / std::max(ref, 1e-300);
    out.check("bulk_gap", rel, strictly_decreasing(bulk, kRoundoff * std::max(ref, 1.0)) && rel <= c.checks.at("bulk_gap").tol);
  }
  if (out.wants("pairing_gaps")) {
    bool ok = !pg.empty();
    for (std::size_t f = 0; ok && f < rep.limit_pairings.size(); ++f) {
      std::vector<double> col;
      for (const auto& row : pg) col.push_back(row[f]);
      ok = strictly_decreasing(col, kRoundoff * std::max(std::abs(rep.limit_pairings[f]), 1.0));
    }
    out.check("pairing_gaps", pg.empty() || pg.back().empty() ? kNaN : *std::max_element(pg.back().begin(), pg.back().end()), ok);
  }
  std::vector<double> inv, frac;
  for (const auto& m : rep.members) {
    inv.push_back(m.trace ? m.x3_inv : kNaN);
    frac.push_back(m.trace ? m.horizontal_fraction : kNaN);
  }
  if (out.wants("x3_invariance"))
    out.check("x3_invariance", inv.back(), strictly_decreasing(inv, kRoundoff) && inv.back() <= c.checks.at("x3_invariance").tol);
  if (out.wants("horizontal_fraction"))
    out.check("horizontal_fraction", frac.back(), frac.back() <= c.checks.at("horizontal_fraction").tol);
  std::vector<std::vector<Field>> cps;
  for (const auto& m : rep.members)
    if (m.trace) cps.push_back(m.trace->v_checkpoints);
  if (rep.limit) cps.push_back(rep.limit->v_checkpoints);
  monotonicity_check(out, cps);
  return out.commit(plot);
}

int run_oracle(const ExperimentConfig& c) {
  Outputs out(c);
  const auto rows = dp_scan(c.oracle, c.deltas, c.max_jumps);
  std::vector<std::vector<std::string>> csv;
  double star = kNaN;
  for (const auto& r : rows) {
    csv.push_back({format_number(r.delta), format_number(r.energy), std::to_string(r.n_jumps)});
    if (std::isnan(star) && r.n_jumps > 0) star = r.delta;
  }
  write_csv(out.path("oracle1d.csv"), {"delta", "energy", "n_jumps"}, csv);
  // Uncracked energy delta^2 / L meets G_c at delta = sqrt(G_c L).
  const double expected = std::sqrt(c.oracle.toughness * c.oracle.length);
  out.summary()["critical_delta"] = num(star);
  out.summary()["critical_delta_expected"] = expected;
  if (out.wants("critical_load")) {
    const double rel = std::abs(star / expected - 1.0);
    out.check("critical_load", rel, rel <= c.checks.at("critical_load").tol);
  }
  return out.commit(fmt::format("{}set xlabel 'delta'\nset ylabel 'energy'\n"
                                "plot 'oracle1d.csv' using 1:2 with lines title 'DP minimum'\n",
                                kPlotHeader));
}

}  // namespace

int execute(const ExperimentConfig& c) {
  log_info(fmt::format("scenario {} -> {}", to_string(c.scenario), c.output_dir.string()));
  switch (c.scenario) {
    case Scenario::relax: return run_relax(c);
    case Scenario::run2d:
    case Scenario::run3d: return run_single(c);
    case Scenario::sweep: return run_sweep_scenario(c);
    case Scenario::oracle1d: return run_oracle(c);
    case Scenario::stability: return run_stability(c);
  }
  throw ConfigError("unknown scenario");
}

}  // namespace lamella

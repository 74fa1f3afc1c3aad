#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <doctest.h>
#include <json.hpp>

#include "lamella/config.hpp"
#include "lamella/execute.hpp"

using namespace lamella;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("lamella_exec_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json summary(const fs::path& out) { return json::parse(slurp(out / "summary.json")); }

// Runs the command-line tool and returns its exit status.
int cli(const std::string& args) {
  const std::string cmd = std::string(LAMELLA_CLI) + " " + args + " >/dev/null 2>&1";
  const int raw = std::system(cmd.c_str());
  return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
}

fs::path write_config(const fs::path& dir, const json& doc) {
  const fs::path p = dir / "config.json";
  std::ofstream(p) << doc.dump(2);
  return p;
}

const json kElastic2d = {{"grid", {{"nx", 8}, {"ny", 8}}},
                         {"phase", {{"enabled", false}}},
                         {"program", {{"load", {{1.0, 0.0}, {0.0, 0.5}, {0.2, 0.0}}}, {"steps", 4}}},
                         {"checks", {{"balance", true}, {"monotonicity", true}}}};

}  // namespace

TEST_SUITE("execute") {
  TEST_CASE("elastic 2D run succeeds and writes its outputs") {
    const auto dir = scratch_dir("run2d");
    const auto cfg = write_config(dir, kElastic2d);
    CHECK(cli("run2d --config " + cfg.string() + " --out " + (dir / "out").string()) == exit_ok);
    for (const char* f : {"resolved_config.json", "summary.json", "trace.csv", "plot.gp", "fields/u_final.csv",
                          "fields/v_final.csv"})
      CHECK(fs::exists(dir / "out" / f));
    const auto s = summary(dir / "out");
    CHECK(s["status"] == "ok");
    CHECK(s["checks"]["balance"]["pass"] == true);
    CHECK(s["final"]["total"].get<double>() == doctest::Approx(2.0 * (1.0 + 0.25 + 0.04)));
    // No temporary directories are left next to the output.
    for (const auto& e : fs::directory_iterator(dir)) CHECK(e.path().filename().string().find(".tmp-") == std::string::npos);
  }

  TEST_CASE("identical inputs give byte-identical outputs") {
    const auto dir = scratch_dir("repro");
    json doc = kElastic2d;
    doc["phase"] = {{"enabled", true}, {"ell", 0.25}};
    doc["checks"] = {{"stability", true}};
    doc["stability"] = {{"competitors", 4}};
    const auto cfg = write_config(dir, doc);
    for (const char* o : {"a", "b"})
      CHECK(cli("stability --seed 5 --jobs 2 --config " + cfg.string() + " --out " + (dir / o).string()) == exit_ok);
    int files = 0;
    for (const auto& e : fs::recursive_directory_iterator(dir / "a")) {
      if (!e.is_regular_file()) continue;
      ++files;
      const auto rel = fs::relative(e.path(), dir / "a");
      CAPTURE(rel.string());
      if (rel == "resolved_config.json") {  // differs only in output_dir
        auto a = json::parse(slurp(e.path())), b = json::parse(slurp(dir / "b" / rel));
        a.erase("output_dir");
        b.erase("output_dir");
        CHECK(a.dump() == b.dump());
      } else {
        CHECK(slurp(e.path()) == slurp(dir / "b" / rel));
      }
    }
    CHECK(files >= 6);
  }

  TEST_CASE("a sweep member that exceeds the sup bound makes the sweep partial") {
    const auto dir = scratch_dir("sweep");
    json doc{{"grid", {{"nx", 4}, {"ny", 4}, {"nz", 2}}},
             {"phase", {{"enabled", false}}},
             {"eps_list", {0.4, 0.1}},
             {"test_fields", 1},
             {"program", {{"load", {{0.5, 0.0}, {0.0, 0.5}, {0.0, 0.0}}}, {"transverse", {0.0, 0.0, 4.0}}, {"steps", 2}}}};
    auto cfg = write_config(dir, doc);
    REQUIRE(cli("sweep --config " + cfg.string() + " --out " + (dir / "full").string()) == exit_ok);
    const auto full = summary(dir / "full");
    const double big = full["members"][0]["final"]["sup_u"], small = full["members"][1]["final"]["sup_u"];
    REQUIRE(big > small);
    CHECK(full["partial"] == false);

    doc["program"]["sup_u_bound"] = 0.5 * (big + small);
    cfg = write_config(dir, doc);
    CHECK(cli("sweep --config " + cfg.string() + " --out " + (dir / "cut").string()) == exit_check_failed);
    const auto cut = summary(dir / "cut");
    CHECK(cut["partial"] == true);
    CHECK(cut["members"][0].contains("error"));
    CHECK(cut["members"][1].contains("final"));
    CHECK(fs::exists(dir / "cut" / "members/eps_1/trace.csv"));
  }

  TEST_CASE("oracle scan crosses at sqrt(G_c)") {
    const auto dir = scratch_dir("oracle");
    const auto cfg = write_config(dir, json{{"oracle1d", {{"n", 32}, {"toughness", 2.0}, {"delta_max", 3.0}, {"delta_count", 301}}},
                                            {"checks", {{"critical_load", {{"tol", 0.02}}}}}});
    CHECK(cli("oracle1d --config " + cfg.string() + " --out " + (dir / "out").string()) == exit_ok);
    const auto s = summary(dir / "out");
    CHECK(s["critical_delta"].get<double>() == doctest::Approx(std::sqrt(2.0)).epsilon(0.01));
    CHECK(fs::exists(dir / "out" / "oracle1d.csv"));
  }

  TEST_CASE("a failing check exits with status 2 but keeps the outputs") {
    const auto dir = scratch_dir("fail");
    const auto cfg = write_config(dir, json{{"oracle1d", {{"n", 32}, {"toughness", 2.0}, {"delta_count", 11}}},
                                            {"checks", {{"critical_load", {{"tol", 1e-6}}}}}});
    CHECK(cli("oracle1d --config " + cfg.string() + " --out " + (dir / "out").string()) == exit_check_failed);
    CHECK(summary(dir / "out")["status"] == "check_failed");
  }

  TEST_CASE("bad input exits with status 1 and writes nothing") {
    const auto dir = scratch_dir("bad");
    CHECK(cli("run2d") == exit_error);
    CHECK(cli("run2d --config " + (dir / "missing.json").string()) == exit_error);
    const auto cfg = write_config(dir, json{{"grid", {{"nx", 0}}}});
    CHECK(cli("run2d --config " + cfg.string() + " --out " + (dir / "out").string()) == exit_error);
    CHECK_FALSE(fs::exists(dir / "out"));
    CHECK(cli("run3d --config " + cfg.string()) == exit_error);
  }

  TEST_CASE("execute can be driven in-process") {
    const auto dir = scratch_dir("inproc");
    ConfigOverrides ov;
    ov.scenario = Scenario::relax;
    ov.output_dir = dir / "out";
    json doc{{"model", {{"kind", "quadratic-isotropic"}}},
             {"envelope", {{"table_axes", {{-1, 1, 3}, {0, 0, 1}, {0, 0, 1}, {0, 0, 1}, {0, 0, 1}, {0, 0, 1}}}}},
             {"checks", {{"envelope_below_w0", true}}}};
    CHECK(execute(parse_config_json(doc, ov)) == exit_ok);
    CHECK(fs::exists(dir / "out" / "envelope_table.csv"));
  }
}

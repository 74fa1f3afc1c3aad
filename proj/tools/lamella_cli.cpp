#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "lamella/config.hpp"
#include "lamella/errors.hpp"
#include "lamella/execute.hpp"
#include "lamella/log.hpp"

using namespace lamella;

int main(int argc, char** argv) {
  CLI::App app{"Thin-film fracture: envelopes, phase-field evolutions and eps-sweeps"};
  app.require_subcommand(1);

  struct Args {
    std::string config;
    std::string out;
    int jobs = 0;
    long long seed = -1;
  } args;

  const std::pair<Scenario, const char*> commands[] = {
      {Scenario::relax, "tabulate QW_0 on a grid of planar matrices"},
      {Scenario::run2d, "quasistatic evolution of the relaxed 2D model"},
      {Scenario::run3d, "quasistatic evolution of the scaled 3D model at one eps"},
      {Scenario::sweep, "3D evolutions over a decreasing eps list against the 2D limit"},
      {Scenario::oracle1d, "1D free-discontinuity DP over a scan of boundary openings"},
      {Scenario::stability, "evolve, then probe the final state with random competitors"},
  };
  std::optional<Scenario> chosen;
  for (const auto& [scenario, help] : commands) {
    auto* sub = app.add_subcommand(std::string(to_string(scenario)), help);
    sub->add_option("--config", args.config, "JSON experiment config")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", args.out, "output directory (overrides output_dir)");
    sub->add_option("--jobs", args.jobs, "worker threads (overrides jobs)")->check(CLI::PositiveNumber);
    sub->add_option("--seed", args.seed, "random seed (overrides seed)")->check(CLI::NonNegativeNumber);
    sub->callback([&chosen, s = scenario] { chosen = s; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? exit_ok : exit_error;
  }

  init_logging();
  try {
    ConfigOverrides ov;
    ov.scenario = chosen;
    if (!args.out.empty()) ov.output_dir = args.out;
    if (args.jobs > 0) ov.jobs = args.jobs;
    if (args.seed >= 0) ov.seed = static_cast<std::uint64_t>(args.seed);
    const ExperimentConfig cfg = parse_config(args.config, ov);
    const int status = execute(cfg);
    std::printf("%s: %s (%s)\n", std::string(to_string(cfg.scenario)).c_str(),
                status == exit_ok ? "ok" : "check failed", cfg.output_dir.string().c_str());
    return status;
  } catch (const ValidationError& e) {
    std::fprintf(stderr, "%s\n", e.what());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
  }
  return exit_error;
}

#include <cmath>

#include <doctest.h>

#include "lamella/envelope.hpp"
#include "lamella/errors.hpp"
#include "lamella/evolve.hpp"
#include "lamella/oracle.hpp"

using namespace lamella;

namespace {

EvolutionProblem strip(int n, bool corrected) {
  EvolutionProblem pb;
  pb.grid.nx = n;
  pb.grid.ny = 2;
  pb.grid.ly = 2.0 / n;
  pb.grid.frame = 8;
  pb.grid.frame_sides = frame_left | frame_right;
  pb.density = make_limit_density(DensityModel::quadratic_isotropic());
  pb.phase.ell = 4.0 / n;
  pb.phase.effective_toughness = corrected;
  pb.program.load(2, 0) = 1.0;
  pb.options.seeds = {{0, 0.5 + 0.5 / n}};
  pb.options.multistart = true;
  return pb;
}

EvolutionProblem square(int n) {
  EvolutionProblem pb;
  pb.grid.nx = pb.grid.ny = n;
  pb.density = make_limit_density(DensityModel::quadratic_isotropic());
  pb.phase.ell = 0.25;
  pb.program.load << 0.8, 0.1, 0.0, 0.6, 0.2, -0.3;
  pb.program.steps = 4;
  return pb;
}

}  // namespace

TEST_SUITE("evolve") {
  TEST_CASE("a zero datum leaves the undeformed, uncracked state in place") {
    EvolutionProblem pb = square(8);
    pb.program.load.setZero();
    const auto s0 = initial_state(pb, 0.0);
    const auto r = minimize_at_step(pb, s0, 1.0, s0.v);
    CHECK(r.state.u.values.cwiseAbs().maxCoeff() == 0.0);
    CHECK(r.state.v.values.minCoeff() == 1.0);
    CHECK(r.energies.total() < 1e-25);  // Q1 gradients of a constant are zero up to roundoff
  }

  TEST_CASE("a small stretch barely damages the film") {
    EvolutionProblem pb = square(8);
    pb.program.load *= 0.1;
    const auto s0 = initial_state(pb, 0.0);
    const auto r = minimize_at_step(pb, s0, 1.0, s0.v);
    CHECK(r.state.v.values.minCoeff() >= 0.99);
    const double expected = 2.0 * pb.grid.omega_area() * make_w0(DensityModel::quadratic_isotropic())(pb.program.load);
    CHECK(r.energies.bulk == doctest::Approx(expected).epsilon(0.02));
    CHECK(r.energies.bulk <= expected);
  }

  TEST_CASE("a single step past the critical opening costs about one crack") {
    // One jump relaxes the 1D problem completely: the minimum is G_c per unit width.
    const int n = 64;
    EvolutionProblem pb = strip(n, true);
    const double delta = 1.5;
    const auto s0 = initial_state(pb, 0.0);
    const auto r = minimize_at_step(pb, s0, delta, s0.v);
    Dp1dProblem dp;
    dp.n = n;
    dp.right = delta;
    const double oracle = dp_minimize_1d(dp, 1).energy;
    CHECK(oracle == doctest::Approx(1.0));
    CHECK(std::abs(r.energies.total() / (2 * pb.grid.ly) / oracle - 1.0) <= 0.05);
  }

  TEST_CASE("below the critical opening the strip only softens") {
    EvolutionProblem pb = strip(64, false);
    const auto s0 = initial_state(pb, 0.0);
    const auto r = minimize_at_step(pb, s0, 0.5, s0.v);
    // Homogeneous AT2 state of the strip: v = k / (k + delta^2), k = G_c / (4 ell).
    const double k = 1.0 / (4.0 * pb.phase.ell), v = k / (k + 0.25);
    CHECK(r.energies.bulk / (2 * pb.grid.ly) == doctest::Approx(v * v * 0.25).epsilon(0.02));
    CHECK(r.state.v.values.minCoeff() > 0.9);
  }

  TEST_CASE("the phase field never heals along an evolution") {
    EvolutionProblem pb = strip(32, false);
    pb.program.final_time = 1.5;
    pb.program.steps = 6;
    const auto tr = run_evolution(pb);
    REQUIRE(tr.v_checkpoints.size() == 7);
    for (std::size_t k = 1; k < tr.v_checkpoints.size(); ++k)
      CHECK((tr.v_checkpoints[k].values - tr.v_checkpoints[k - 1].values).maxCoeff() <= 0.0);
    CHECK(tr.rows.back().surface > 0.0);
    for (const auto& row : tr.rows) CHECK(row.total == doctest::Approx(row.bulk + row.surface));
  }

  TEST_CASE("final states of an elastic ramp are stable") {
    EvolutionProblem pb = square(8);
    const auto tr = run_evolution(pb);
    const auto rep = stability_check(pb, tr.final_state, 6, 42);
    CHECK(rep.passed);
    CHECK(rep.competitors == 6);
    CHECK(rep.energy == doctest::Approx(tr.rows.back().total));
  }

  TEST_CASE("a perturbed state is reported unstable") {
    EvolutionProblem pb = square(8);
    const auto tr = run_evolution(pb);
    auto s = tr.final_state;
    for (int n = 0; n < s.u.grid.node_count(); ++n)
      if (!s.u.grid.dirichlet_node(n)) s.u.at(n, 0) += 0.05;
    CHECK_FALSE(stability_check(pb, s, 6, 42).passed);
  }

  TEST_CASE("sup-norm bound aborts the evolution") {
    EvolutionProblem pb = square(8);
    pb.program.sup_u_bound = 0.5;
    CHECK_THROWS_AS(run_evolution(pb), BoundExceeded);
  }

  TEST_CASE("program validation") {
    BoundaryProgram p;
    p.steps = 0;
    CHECK_THROWS_AS(p.validate(), ConfigError);
    p.steps = 4;
    p.final_time = 2.0;
    const auto t = p.times();
    REQUIRE(t.size() == 5);
    CHECK(t.front() == 0.0);
    CHECK(t.back() == 2.0);
  }

  TEST_CASE("seed profiles vanish on the seed plane") {
    Grid g;
    g.nx = 16;
    g.ny = 4;
    const Field v = seed_profile(g, {0, 0.5}, 0.1, 0.0);
    CHECK(v.values.minCoeff() == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(v.values.maxCoeff() < 1.0);
  }
}

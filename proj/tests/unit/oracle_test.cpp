#include <cmath>
#include <vector>

#include <doctest.h>

#include "lamella/errors.hpp"
#include "lamella/oracle.hpp"

using namespace lamella;

TEST_SUITE("oracle") {
  TEST_CASE("a large opening is cheapest as one crack at the lowest interface") {
    Dp1dProblem p;
    p.n = 8;
    p.right = 2.0;
    const auto s = dp_minimize_1d(p, 3);
    CHECK(s.energy == doctest::Approx(1.0));
    REQUIRE(s.jumps.size() == 1);
    CHECK(s.jumps[0] == 1);
    CHECK(s.jump_positions[0] == doctest::Approx(0.125));
    REQUIRE(s.cell_values.size() == 8);
    CHECK(s.cell_values[0] == doctest::Approx(0.0));
    CHECK(s.cell_values[7] == doctest::Approx(2.0));
  }

  TEST_CASE("small openings stay elastic, ties favour fewer jumps") {
    Dp1dProblem p;
    p.n = 8;
    p.right = 0.5;
    auto s = dp_minimize_1d(p, 3);
    CHECK(s.jumps.empty());
    CHECK(s.energy == doctest::Approx(0.25));
    CHECK(s.cell_values[3] == doctest::Approx(0.5 * 3.5 / 8));
    p.right = 1.0;  // elastic energy equals the toughness
    s = dp_minimize_1d(p, 3);
    CHECK(s.jumps.empty());
    CHECK(s.energy == doctest::Approx(1.0));
  }

  TEST_CASE("segments relax freely unless pinned at both ends") {
    Dp1dProblem p;
    p.n = 4;
    p.length = 2.0;
    p.right = 1.0;
    CHECK(dp_segment_cost(p, 0, 4, true, true) == doctest::Approx(0.5));
    CHECK(dp_segment_cost(p, 0, 2, true, false) == 0.0);
    ElasticDensity1d shifted;
    shifted.f = [](double s) { return (s - 0.2) * (s - 0.2) + 0.05; };
    shifted.argmin = 0.2;
    p.density = shifted;
    CHECK(dp_segment_cost(p, 1, 3, false, false) == doctest::Approx(0.05));
  }

  TEST_CASE("scan: the critical opening is sqrt(G_c length)") {
    Dp1dProblem p;
    p.n = 32;
    p.toughness = 2.25;
    std::vector<double> deltas;
    for (int k = 0; k <= 300; ++k) deltas.push_back(3.0 * k / 300);
    const auto rows = dp_scan(p, deltas, 1);
    REQUIRE(rows.size() == deltas.size());
    double first = NAN;
    for (const auto& r : rows) {
      CHECK(r.energy == doctest::Approx(std::min(r.delta * r.delta, 2.25)));
      if (r.n_jumps > 0 && std::isnan(first)) first = r.delta;
    }
    CHECK(first == doctest::Approx(1.5).epsilon(0.01));
  }

  TEST_CASE("convex envelope of samples") {
    const std::vector<double> x{0, 1, 2, 3, 4};
    const std::vector<double> f{0, 1, 0, 1, 0};
    const auto e = convex_envelope_1d(x, f);
    for (double v : e) CHECK(v == doctest::Approx(0.0));
    const std::vector<double> g{4, 1, 0, 1, 4};
    CHECK(convex_envelope_1d(x, g) == g);
    const std::vector<double> w{0, 1, 1, 0.5, 0};
    const auto ew = convex_envelope_1d(x, w);
    CHECK(ew[1] == doctest::Approx(0.0));
  }

  TEST_CASE("invalid problems are rejected") {
    Dp1dProblem p;
    p.n = 0;
    CHECK_THROWS_AS(p.validate(), ConfigError);
    p.n = 4;
    p.toughness = -1.0;
    CHECK_THROWS_AS(dp_minimize_1d(p, 1), ConfigError);
  }
}

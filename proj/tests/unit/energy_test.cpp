#include <random>

#include <doctest.h>

#include "lamella/energy.hpp"
#include "lamella/errors.hpp"

using namespace lamella;

namespace {

FullMatrix random_full(std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  FullMatrix m;
  for (int k = 0; k < 9; ++k) m(k) = n(rng);
  return m;
}

std::vector<DensityModel> all_kinds() {
  std::mt19937_64 rng(7);
  const FullMatrix m = random_full(rng);
  FullMatrix well = FullMatrix::Zero();
  well(0, 0) = 1.0;
  return {DensityModel::quadratic_isotropic(), DensityModel::quadratic_shifted(m),
          DensityModel::double_well(well), DensityModel::p_power(3.0, 1.0, m),
          DensityModel::p_power(2.5, 0.5)};
}

}  // namespace

TEST_SUITE("energy") {
  TEST_CASE("growth bounds and derivatives hold on random samples for every kind") {
    for (const auto& model : all_kinds()) {
      CAPTURE(to_string(model.kind));
      const auto audit = audit_growth(model, 500, 11);
      CHECK(audit.passed);
      CHECK(audit.samples == 500);
      CHECK(audit.lower_slack >= 0.0);
      CHECK(audit.upper_slack >= 0.0);
      CHECK(audit.derivative_slack >= 0.0);
      CHECK(audit.max_fd_error < 1e-6);
    }
  }

  TEST_CASE("a beta that is too small fails the audit") {
    auto model = DensityModel::p_power(3.0, 1.0);
    model.beta = 0.1;
    CHECK_FALSE(audit_growth(model, 200, 3).passed);
  }

  TEST_CASE("gradient matches central differences") {
    std::mt19937_64 rng(5);
    for (const auto& model : all_kinds()) {
      const FullMatrix f = random_full(rng);
      const FullMatrix g = grad_w(model, f);
      const double h = 1e-6;
      for (int k = 0; k < 9; ++k) {
        FullMatrix fp = f, fm = f;
        fp(k) += h;
        fm(k) -= h;
        CHECK(g(k) == doctest::Approx((eval_w(model, fp) - eval_w(model, fm)) / (2 * h)).epsilon(1e-6));
      }
    }
  }

  TEST_CASE("double well picks the first branch on ties") {
    FullMatrix a = FullMatrix::Zero();
    a(0, 0) = 1.0;
    const auto model = DensityModel::double_well(a);
    CHECK(eval_w(model, FullMatrix::Zero()) == doctest::Approx(1.0));
    CHECK(grad_w(model, FullMatrix::Zero()).isApprox(-2.0 * a));
  }

  TEST_CASE("transverse relaxation of the quadratic kinds is the in-plane distance") {
    std::mt19937_64 rng(9);
    const FullMatrix m = random_full(rng);
    const PlanarMatrix xi = planar_part(random_full(rng));
    const auto iso = relax_transverse(DensityModel::quadratic_isotropic(), xi);
    CHECK(iso.value == doctest::Approx(xi.squaredNorm()).epsilon(1e-14));
    CHECK(iso.argmin_z->norm() == doctest::Approx(0.0));
    const auto sh = relax_transverse(DensityModel::quadratic_shifted(m), xi);
    CHECK(sh.value == doctest::Approx((xi - planar_part(m)).squaredNorm()).epsilon(1e-12));
    CHECK(sh.argmin_z->isApprox(m.col(2)));
  }

  TEST_CASE("Newton relaxation of the p-power density agrees with its closed form") {
    std::mt19937_64 rng(13);
    const FullMatrix m = random_full(rng);
    const auto model = DensityModel::p_power(3.0, 1.0, m);
    for (int k = 0; k < 10; ++k) {
      const PlanarMatrix xi = planar_part(random_full(rng));
      const double closed = std::pow(1.0 + (xi - planar_part(m)).squaredNorm(), 1.5);
      CHECK(relax_transverse(model, xi).value == doctest::Approx(closed).epsilon(1e-10));
      CHECK(grad_w0(model, xi).isApprox(3.0 * std::sqrt(1.0 + (xi - planar_part(m)).squaredNorm()) *
                                            (xi - planar_part(m)),
                                        1e-8));
    }
  }

  TEST_CASE("names round-trip and bad parameters are rejected") {
    for (const auto& model : all_kinds()) CHECK(density_kind_from_string(to_string(model.kind)) == model.kind);
    CHECK_THROWS_AS(density_kind_from_string("neo-hookean"), ConfigError);
    CHECK_THROWS_AS(DensityModel::p_power(1.0, 0.0).validate(), ConfigError);
    CHECK_THROWS_AS(DensityModel::double_well(FullMatrix::Zero()).validate(), ConfigError);
  }
}

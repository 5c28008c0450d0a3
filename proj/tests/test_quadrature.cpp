#include <cmath>
#include <numbers>

#include <catch2/catch_amalgamated.hpp>

#include "ddwave/quadrature.hpp"

using namespace ddwave;

TEST_CASE("order one rule evaluates at the mean") {
  const GaussHermiteRule r = gauss_hermite(1);
  REQUIRE(r.nodes.size() == 1);
  CHECK(r.nodes[0] == Catch::Approx(0.0).margin(1e-14));
  CHECK(r.weights[0] == Catch::Approx(std::sqrt(std::numbers::pi)));
}

TEST_CASE("order five nodes and weights match the classical table") {
  const GaussHermiteRule r = gauss_hermite(5);
  const double nodes[] = {-2.020182870456086, -0.9585724646138185, 0.0,
                          0.9585724646138185, 2.020182870456086};
  const double weights[] = {0.019953242059045913, 0.3936193231522412,
                            0.9453087204829419, 0.3936193231522412,
                            0.019953242059045913};
  for (int i = 0; i < 5; ++i) {
    CHECK(r.nodes[i] == Catch::Approx(nodes[i]).margin(1e-12));
    CHECK(r.weights[i] == Catch::Approx(weights[i]).margin(1e-12));
  }
}

TEST_CASE("moments against exp(-x^2) are exact") {
  const GaussHermiteRule r = gauss_hermite(10);
  const double sp = std::sqrt(std::numbers::pi);
  CHECK(r.weights.sum() == Catch::Approx(sp).epsilon(1e-13));
  CHECK((r.weights.array() * r.nodes.array().square()).sum() ==
        Catch::Approx(0.5 * sp).epsilon(1e-13));
  CHECK((r.weights.array() * r.nodes.array().pow(4)).sum() ==
        Catch::Approx(0.75 * sp).epsilon(1e-13));
  CHECK((r.weights.array() * r.nodes.array().pow(3)).sum() ==
        Catch::Approx(0.0).margin(1e-13));
}

TEST_CASE("Gaussian expectation rule reproduces normal moments") {
  const double sigma = 3.7e-9;
  const GaussianRule g = gaussian_expectation_rule(gauss_hermite(6), sigma);
  CHECK(g.weights.sum() == Catch::Approx(1.0).epsilon(1e-13));
  double m2 = 0, m4 = 0, m6 = 0;
  for (int i = 0; i < g.points.size(); ++i) {
    m2 += g.weights[i] * std::pow(g.points[i], 2);
    m4 += g.weights[i] * std::pow(g.points[i], 4);
    m6 += g.weights[i] * std::pow(g.points[i], 6);
  }
  CHECK(m2 == Catch::Approx(std::pow(sigma, 2)).epsilon(1e-12));
  CHECK(m4 == Catch::Approx(3.0 * std::pow(sigma, 4)).epsilon(1e-12));
  CHECK(m6 == Catch::Approx(15.0 * std::pow(sigma, 6)).epsilon(1e-12));
}

TEST_CASE("invalid order is rejected") {
  CHECK_THROWS_AS(gauss_hermite(0), ConfigError);
}

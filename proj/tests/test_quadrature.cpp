#include <cmath>
#include <numbers>

#include <doctest.h>

#include "fraclab/errors.hpp"
#include "fraclab/quadrature.hpp"

using namespace fraclab;

TEST_CASE("adaptive rule reproduces closed-form integrals") {
  CHECK(integrate([](double x) { return std::sin(x); }, 0.0, std::numbers::pi).value ==
        doctest::Approx(2.0).epsilon(1e-13));
  CHECK(integrate([](double x) { return 4.0 / (1.0 + x * x); }, 0.0, 1.0).value ==
        doctest::Approx(std::numbers::pi).epsilon(1e-13));
  CHECK(integrate([](double x) { return std::exp(-x); }, 0.0, 50.0).value ==
        doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("error estimate bounds the true error") {
  const auto r = integrate([](double x) { return std::cos(10.0 * x); }, 0.0, 3.0);
  const double exact = std::sin(30.0) / 10.0;
  CHECK(std::abs(r.value - exact) <= std::max(r.error_estimate, 1e-14));
}

TEST_CASE("unreachable tolerance raises") {
  // depth cap makes the oscillatory target unattainable
  CHECK_THROWS_AS(integrate([](double x) { return std::sin(1e6 * x); }, 0.0, 1.0,
                            1e-300, 1e-16, 3),
                  QuadratureFailure);
}

TEST_CASE("gauss-legendre integrates polynomials exactly") {
  const auto rule = gauss_legendre(8);  // exact through degree 15
  double s = 0.0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
    const double x = rule.nodes[i];
    s += rule.weights[i] * (5.0 * x * x * x * x - x * x + 3.0);
  }
  CHECK(s == doctest::Approx(2.0 - 2.0 / 3.0 + 6.0).epsilon(1e-14));
}

TEST_CASE("gauss-hermite matches normal moments") {
  const auto rule = gauss_hermite_probabilists(32);
  double m2 = 0.0, m4 = 0.0, m6 = 0.0, mass = 0.0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
    const double x = rule.nodes[i];
    mass += rule.weights[i];
    m2 += rule.weights[i] * x * x;
    m4 += rule.weights[i] * x * x * x * x;
    m6 += rule.weights[i] * std::pow(x, 6);
  }
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(m2 == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(m4 == doctest::Approx(3.0).epsilon(1e-13));
  CHECK(m6 == doctest::Approx(15.0).epsilon(1e-13));
}

#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "uqpipe/bench.hpp"
#include "uqpipe/errors.hpp"
#include "uqpipe/rng.hpp"

using namespace uqpipe;

namespace {
constexpr double kPi = 3.14159265358979323846;
}

TEST_SUITE("bench") {

TEST_CASE("ishigami values") {
  CHECK(bench::ishigami(Vector::Zero(3)) == 0.0);
  CHECK(bench::ishigami((Vector(3) << kPi / 2, kPi / 2, 0).finished()) == doctest::Approx(8.0).epsilon(1e-15));
  const auto c = bench::ishigami_indices();
  CHECK(c.s3 == 0.0);
  CHECK(c.s1 + c.s2 + c.s13 == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("g-function") {
  CHECK(bench::gfunction(Vector::Constant(2, 0.5), Vector::Zero(2)) == 0.0);
  const Vector s = bench::gfunction_first_order(Vector::Zero(2));
  CHECK(s(0) == doctest::Approx(3.0 / 7.0).epsilon(1e-14));
  CHECK(s(1) == doctest::Approx(3.0 / 7.0).epsilon(1e-14));
  const Vector a = bench::default_gfunction_coefficients();
  REQUIRE(a.size() == 15);
  const Vector closed = bench::gfunction_first_order(a);
  const Vector quad = oracle::gfunction_quadrature(a);
  CHECK((closed - quad).cwiseAbs().maxCoeff() <= 1e-6);
  for (int k = 4; k < 15; ++k) CHECK(closed(k) < 1e-4);
  // Large coefficients make the function inert.
  CHECK(bench::gfunction(Vector::Constant(3, 0.1), Vector::Constant(3, 1e12)) == doctest::Approx(1.0).epsilon(1e-9));
  // The variance vanishes but the normalized indices stay finite.
  const Vector inert = bench::gfunction_first_order(Vector::Constant(3, 1e12));
  CHECK(inert.sum() == doctest::Approx(1.0).epsilon(1e-9));
  CHECK_THROWS_AS(bench::gfunction(Vector::Zero(2), (Vector(2) << 1, -1).finished()), ConfigError);
}

TEST_CASE("hetero-ishigami structure") {
  const auto f = bench::make_hetero_ishigami();
  CHECK(f.space.dimension() == 11);
  CHECK_THROWS_AS(bench::hetero_ishigami(Vector::Zero(3)), DataError);
  Vector x(11);
  Rng rng(3);
  for (int t = 0; t < 20; ++t) {
    for (int k = 0; k < 11; ++k) x(k) = -kPi + 2 * kPi * open_uniform(rng);
    CHECK(bench::hetero_ishigami(x) == doctest::Approx(oracle::hetero_ishigami(x.data())).epsilon(1e-14));
  }
  const Vector xe = (Vector(3) << 0.4, -kPi / 2, 1.1).finished();
  CHECK(bench::hetero_ishigami_dispersion(xe) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(bench::hetero_ishigami_mean(xe) == bench::ishigami(xe));

  // Nested Monte Carlo at one explanatory point.
  const Vector e2 = (Vector(3) << 1.0, 0.7, -2.0).finished();
  const int n = 100000;
  double m = 0.0, m2 = 0.0;
  for (int i = 0; i < n; ++i) {
    x.head(3) = e2;
    for (int k = 3; k < 11; ++k) x(k) = -kPi + 2 * kPi * open_uniform(rng);
    const double y = bench::hetero_ishigami(x);
    m += y / n;
    m2 += y * y / n;
  }
  const double var = m2 - m * m;
  CHECK(std::abs(m - bench::hetero_ishigami_mean(e2)) <= 4.0 * std::sqrt(var / n));
  CHECK(std::abs(var - bench::hetero_ishigami_dispersion(e2)) <= 0.02 * bench::hetero_ishigami_dispersion(e2));
}

TEST_CASE("registry") {
  for (const auto& name : bench::bench_names()) CHECK(bench::make_bench(name).name == name);
  CHECK_THROWS_AS(bench::make_bench("nope"), ConfigError);
  const auto g = bench::make_gfunction();
  CHECK(g.space.dimension() == 15);
}

}

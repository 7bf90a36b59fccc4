#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "uqpipe/bench.hpp"
#include "uqpipe/design.hpp"
#include "uqpipe/errors.hpp"
#include "uqpipe/joint_gp.hpp"
#include "uqpipe/quantile.hpp"
#include "uqpipe/rng.hpp"

using namespace uqpipe;

TEST_SUITE("quantile") {

TEST_CASE("empirical quantile convention") {
  Vector v(100);
  for (int i = 0; i < 100; ++i) v(i) = 100 - i;
  CHECK(empirical_quantile(v, 0.95) == 95.0);
  CHECK(empirical_quantile(v, 0.5) == 50.0);
  CHECK(empirical_quantile(v, 0.001) == 1.0);
  CHECK(empirical_quantile(Vector::Constant(1, 7.5), 0.3) == 7.5);
  CHECK(empirical_quantile(Vector::Constant(1, 7.5), 0.99) == 7.5);
  CHECK_THROWS_AS(empirical_quantile(Vector(0), 0.5), DataError);
  CHECK_THROWS_AS(empirical_quantile(v, 1.0), ConfigError);

  Rng rng(1);
  Vector u(257);
  for (Eigen::Index i = 0; i < u.size(); ++i) u(i) = standard_normal(rng);
  const Vector g = u.unaryExpr([](double t) { return std::exp(t); });
  double prev = -1e300;
  for (const double p : {0.1, 0.25, 0.5, 0.9, 0.95, 0.99}) {
    CHECK(empirical_quantile(g, p) == std::exp(empirical_quantile(u, p)));
    const double q = empirical_quantile(u, p);
    CHECK(q >= prev);
    prev = q;
  }
}

TEST_CASE("bootstrap interval") {
  const auto ci = bootstrap_quantile_ci(Vector::Constant(50, 3.0), 0.95, 500, 0.9, 1);
  CHECK(ci.first == 3.0);
  CHECK(ci.second == 3.0);
  CHECK_THROWS_AS(bootstrap_quantile_ci(Vector::Constant(50, 3.0), 0.95, 100, 0.9, 1), ConfigError);

  int covered = 0;
  for (int r = 0; r < 100; ++r) {
    Rng rng(derive_seed(40, static_cast<std::uint64_t>(r)));
    Vector u(500);
    for (Eigen::Index i = 0; i < u.size(); ++i) u(i) = open_uniform(rng);
    const auto c = bootstrap_quantile_ci(u, 0.95, 500, 0.9, static_cast<std::uint64_t>(r));
    CHECK(c.first <= empirical_quantile(u, 0.95));
    CHECK(c.second >= empirical_quantile(u, 0.95));
    covered += c.first <= 0.95 && 0.95 <= c.second;
  }
  CHECK(covered >= 80);
  CHECK(covered <= 97);
}

TEST_CASE("plug-in on the exact function matches brute force") {
  const auto f = bench::make_hetero_ishigami();
  const BatchFunction exact = [&](const Matrix& x) { return f.evaluate_rows(x); };
  const double ref = oracle::hetero_ishigami_quantile(0.95, 1000000, 17);
  const int n = 100000;
  const double q = plugin_quantile(exact, f.space, 0.95, n, 3);
  // Standard error of the quantile from the density at q (kernel estimate on a reference sample).
  const Matrix xs = f.space.sample(200000, 4);
  const Vector ys = exact(xs);
  const double h = 0.05;
  const double density = ((ys.array() - ref).abs() < h).cast<double>().sum() / (2.0 * h * ys.size());
  const double se = std::sqrt(0.95 * 0.05 / n) / density;
  CHECK(std::abs(q - ref) <= 2.0 * se + 2.0 * std::sqrt(0.95 * 0.05 / 1e6) / density);
  CHECK_THROWS_AS(plugin_quantile(exact, f.space, 0.95, 5000, 1), ConfigError);

  // p = 0.5 on a symmetric toy sits at the centre.
  const InputSpace sym({Marginal::uniform("a", -1, 1)});
  const BatchFunction odd = [](const Matrix& x) { return Vector(x.col(0).array().cube()); };
  CHECK(std::abs(plugin_quantile(odd, sym, 0.5, 10001, 2)) <= 1e-3);
  double prev = -1e300;
  for (const double p : {0.1, 0.5, 0.9, 0.95}) {
    const double v = plugin_quantile(exact, f.space, p, 10000, 8);
    CHECK(v >= prev);
    prev = v;
  }
}

TEST_CASE("full-GP quantile on a nearly certain model reduces to the plug-in") {
  Matrix x(40, 1);
  for (int i = 0; i < 40; ++i) x(i, 0) = (i + 0.5) / 40.0;
  const Vector y = (3.0 * x.array()).sin().matrix();
  FitOptions opts;
  opts.restarts = 2;
  const GpModel gp = fit_gp(x, y, {0}, NuggetSpec::none(), opts, 1);
  const InputSpace space({Marginal::uniform("a", 0, 1)});
  FullGpSettings fs;
  fs.n_points = 500;
  fs.n_traj = 200;
  const auto noise = [](const Matrix& pts) { return Vector::Zero(pts.rows()).eval(); };
  const FullGpQuantile r = fullgp_quantile(gp, space, 0.95, noise, fs, 3);
  CHECK(r.ci_high - r.ci_low <= 1e-3);
  CHECK(r.ci_low <= r.estimate);
  CHECK(r.estimate <= r.ci_high);
  // P(sin 3x > q) = (pi - 2 asin q) / 3 for x ~ U(0,1).
  const double exact = std::sin((3.14159265358979323846 - 0.15) / 2.0);
  CHECK(std::abs(r.estimate - exact) <= 0.005);
  CHECK(r.trajectory_quantiles.size() == 200);
  fs.n_traj = 100;
  CHECK_THROWS_AS(fullgp_quantile(gp, space, 0.95, noise, fs, 3), ConfigError);
  fs.n_traj = 200;
  fs.n_points = 5000;
  CHECK_THROWS_AS(fullgp_quantile(gp, space, 0.95, noise, fs, 3), ConfigError);
}

TEST_CASE("quantile analysis on hetero-ishigami") {
  const auto f = bench::make_hetero_ishigami();
  DesignMatrix d = lhs(300, 11, 9);
  d.attach_physical(f.space);
  LearningSample s{f.space.names(), d.physical_points, f.evaluate_rows(d.physical_points)};
  JointGpConfig cfg;
  cfg.fit.restarts = 1;
  const JointGpModel joint = build_joint(s, IndexList{1, 0, 2}, cfg, 2).model;
  QuantileOptions opts;
  opts.plugin_n = 20000;
  opts.bootstrap = 500;
  opts.fullgp.n_points = 600;
  opts.fullgp.n_traj = 200;
  const QuantileReport rep = quantile_analysis(joint, f.space, s.y, opts, 4);
  REQUIRE(rep.estimates.size() == 5);
  for (const auto& e : rep.estimates) {
    const bool plug = e.method.rfind("plugin", 0) == 0;
    CHECK(e.ci.has_value() == !plug);
    if (e.ci) {
      CHECK(e.ci->first <= e.estimate);
      CHECK(e.estimate <= e.ci->second);
    }
  }
  CHECK_THROWS(rep.find("nope"));
  const auto het = fullgp_quantile(joint, f.space, 0.95, NoiseMode::heteroscedastic, opts.fullgp, 5);
  CHECK(het.pooled >= rep.find("plugin-heteroscedastic").estimate);
  // Same seed path, increasing p.
  const auto lower = fullgp_quantile(joint, f.space, 0.9, NoiseMode::heteroscedastic, opts.fullgp, 5);
  CHECK(lower.estimate <= het.estimate);
}

}

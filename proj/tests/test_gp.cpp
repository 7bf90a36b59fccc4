#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "uqpipe/errors.hpp"
#include "uqpipe/gp.hpp"
#include "uqpipe/rng.hpp"
#include "uqpipe/validation.hpp"

using namespace uqpipe;

namespace {

Matrix uniform_matrix(int n, int d, std::uint64_t seed) {
  Rng rng(seed);
  Matrix x(n, d);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = open_uniform(rng);
  return x;
}

// Smooth 2-D test function with some curvature.
Vector smooth2(const Matrix& x) {
  Vector y(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) y(i) = std::sin(3.0 * x(i, 0)) + 0.5 * x(i, 1) * x(i, 1);
  return y;
}

// One sample path of a zero-mean Matern 5/2 GP at the rows of x.
Vector gp_path(const Matrix& x, double theta, std::uint64_t seed) {
  Matrix c(x.rows(), x.rows());
  Vector th = Vector::Constant(x.cols(), theta);
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = 0; j < x.rows(); ++j) c(i, j) = oracle::matern52(x.row(i).transpose(), x.row(j).transpose(), th);
  c.diagonal().array() += 1e-10;
  const Matrix l = c.llt().matrixL();
  Rng rng(seed);
  Vector z(x.rows());
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = standard_normal(rng);
  return l * z;
}

}  // namespace

TEST_SUITE("gp_core") {

TEST_CASE("matern correlation") {
  const Vector th = Vector::Constant(1, 1.0);
  Vector a(1), b(1);
  a << 0.3;
  b << 1.3;
  CHECK(matern_correlation(a, a, th) == 1.0);
  const double expect = (1.0 + std::sqrt(5.0) + 5.0 / 3.0) * std::exp(-std::sqrt(5.0));
  CHECK(matern_correlation(a, b, th) == doctest::Approx(expect).epsilon(1e-15));
  CHECK(expect == doctest::Approx(0.52399).epsilon(1e-5));
  Vector a2(2), b2(2), th2(2);
  a2 << 0.1, 0.7;
  b2 << 0.5, -0.2;
  th2 << 0.4, 1.7;
  const double prod = matern52(0.4 / 0.4) * matern52(0.9 / 1.7);
  CHECK(std::abs(matern_correlation(a2, b2, th2) - prod) <= 1e-15);
  CHECK(std::abs(matern_correlation(a2, b2, th2) - oracle::matern52(a2, b2, th2)) <= 1e-15);
  th2(1) = 0.0;
  CHECK_THROWS_AS(matern_correlation(a2, b2, th2), ConfigError);
  const Matrix r = correlation_matrix(uniform_matrix(10, 2, 1), uniform_matrix(10, 2, 1), Vector::Constant(2, 0.3));
  CHECK((r.array() > 0.0).all());
  CHECK((r.array() <= 1.0).all());
  CHECK((r.diagonal().array() == 1.0).all());
}

TEST_CASE("prediction matches a direct-inverse kriging oracle") {
  Matrix x(5, 1);
  x << 0.05, 0.3, 0.45, 0.7, 0.93;
  Vector y(5);
  y << 1.0, -0.4, 0.2, 1.3, 0.8;
  Vector theta(1);
  theta << 0.35;
  const double s2 = 1.7;
  Matrix pts(4, 1);
  pts << 0.0, 0.38, 0.6, 1.4;
  for (const double tau2 : {0.0, 0.05}) {
    const NuggetSpec nug = tau2 > 0 ? NuggetSpec::fixed(tau2) : NuggetSpec::none();
    const auto nll = negative_log_likelihood(x, y, {theta, 0.0, s2}, nug.kind == NuggetKind::none ? NuggetSpec::fixed(0.0) : nug);
    const GpModel gp({0}, x, y, nll.trend, {theta, s2}, nug);
    const auto ours = gp.predict(pts);
    const auto ref = oracle::kriging(x, y, theta, s2, Vector::Constant(5, tau2), pts);
    for (int i = 0; i < 4; ++i) {
      CHECK(std::abs(ours.mean(i) - ref.mean(i)) <= 1e-9);
      CHECK(std::abs(ours.variance(i) - ref.variance(i)) <= 1e-9);
    }
  }
}

TEST_CASE("interpolation and prior reversion") {
  const Matrix x = uniform_matrix(20, 2, 3);
  const Vector y = smooth2(x);
  const Vector theta = Vector::Constant(2, 0.3);
  const double s2 = 0.8;
  const auto nll = negative_log_likelihood(x, y, {theta, 0.0, s2}, NuggetSpec::fixed(0.0));
  const GpModel gp({0, 1}, x, y, nll.trend, {theta, s2}, NuggetSpec::none());
  const auto at_train = gp.predict(x);
  for (int i = 0; i < 20; ++i) {
    CHECK(std::abs(at_train.mean(i) - y(i)) <= 1e-6 * std::max(1.0, std::abs(y(i))));
    CHECK(at_train.variance(i) <= 1e-8 * s2);
    CHECK(at_train.variance(i) >= 0.0);
  }
  Matrix far(1, 2);
  far << 100.0, -100.0;
  const auto f = gp.predict(far);
  CHECK(f.mean(0) == doctest::Approx(gp.trend()).epsilon(1e-9));
  const auto ones = Vector::Ones(20);
  Matrix c = s2 * correlation_matrix(x, x, theta);
  const double trend_term = 1.0 / ones.dot(c.llt().solve(ones));
  CHECK(f.variance(0) == doctest::Approx(s2 + trend_term).epsilon(1e-9));
  CHECK_THROWS_AS(gp.predict(Matrix::Zero(1, 3)), DataError);
}

TEST_CASE("virtual leave-one-out equals brute force") {
  const Matrix x = uniform_matrix(30, 2, 7);
  const Vector y = smooth2(x);
  const Vector theta = (Vector(2) << 0.4, 0.6).finished();
  for (const double tau2 : {0.0, 0.01}) {
    const double s2 = 0.9;
    const NuggetSpec nug = NuggetSpec::fixed(tau2);
    const auto nll = negative_log_likelihood(x, y, {theta, 0.0, s2}, nug);
    const GpModel gp({0, 1}, x, y, nll.trend, {theta, s2}, nug);
    const Vector ref = oracle::brute_force_loo(x, y, theta, s2, Vector::Constant(30, tau2));
    const Vector ours = gp.leave_one_out().mean;
    CHECK((ours - ref).cwiseAbs().maxCoeff() <= 1e-8);
  }
  // Heteroscedastic nugget.
  Vector noise(30);
  for (int i = 0; i < 30; ++i) noise(i) = 0.001 * (1 + i % 5);
  const auto nll = negative_log_likelihood(x, y, {theta, 0.0, 1.1}, NuggetSpec::heteroscedastic(noise));
  const GpModel gp({0, 1}, x, y, nll.trend, {theta, 1.1}, NuggetSpec::heteroscedastic(noise));
  CHECK((gp.leave_one_out().mean - oracle::brute_force_loo(x, y, theta, 1.1, noise)).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("concentrated likelihood equals the full likelihood at the profiled values") {
  const Matrix x = uniform_matrix(25, 2, 9);
  const Vector y = smooth2(x);
  const Vector theta = (Vector(2) << 0.3, 0.8).finished();
  for (const double ratio : {0.0, 0.02}) {
    const NuggetSpec nug = ratio > 0 ? NuggetSpec::estimated() : NuggetSpec::none();
    const auto res = negative_log_likelihood(x, y, {theta, ratio, 1.0}, nug);
    const double full = oracle::full_nll(x, y, theta, res.process_variance,
                                         Vector::Constant(25, ratio * res.process_variance), res.trend);
    CHECK(std::abs(res.value - full) <= 1e-10 * std::max(1.0, std::abs(full)));
  }
  // Known nugget: sigma^2 supplied.
  const auto res = negative_log_likelihood(x, y, {theta, 0.0, 0.7}, NuggetSpec::fixed(0.01));
  CHECK(std::abs(res.value - oracle::full_nll(x, y, theta, 0.7, Vector::Constant(25, 0.01), res.trend)) <= 1e-10 * std::abs(res.value));
}

TEST_CASE("likelihood is invariant to point order and decreases on a 2-point toy") {
  const Matrix x = uniform_matrix(15, 2, 13);
  const Vector y = smooth2(x);
  Matrix xr = x.colwise().reverse();
  Vector yr = y.reverse();
  const HyperParams hp{Vector::Constant(2, 0.5), 0.01, 1.0};
  CHECK(negative_log_likelihood(x, y, hp, NuggetSpec::estimated()).value ==
        doctest::Approx(negative_log_likelihood(xr, yr, hp, NuggetSpec::estimated()).value).epsilon(1e-12));
  Matrix x2(2, 1);
  x2 << 0.0, 1.0;
  Vector y2(2);
  y2 << 2.0, 2.0;
  // Identical outputs: stronger correlation explains them better.
  double prev = negative_log_likelihood(x2, y2, {Vector::Constant(1, 0.5), 0.0, 1.0}, NuggetSpec::fixed(0.0)).value;
  for (const double th : {1.0, 3.0, 10.0, 30.0}) {
    const double v = negative_log_likelihood(x2, y2, {Vector::Constant(1, th), 0.0, 1.0}, NuggetSpec::fixed(0.0)).value;
    CHECK(v < prev);
    prev = v;
  }
}

TEST_CASE("likelihood gradient matches central differences") {
  const Matrix x = uniform_matrix(20, 3, 17);
  Vector y = smooth2(x) + 0.3 * x.col(2);
  Rng rng(99);
  Vector noise(20);
  for (int i = 0; i < 20; ++i) noise(i) = 0.001 + 0.01 * open_uniform(rng);
  const NuggetSpec specs[] = {NuggetSpec::none(), NuggetSpec::estimated(), NuggetSpec::fixed(0.02),
                              NuggetSpec::heteroscedastic(noise)};
  for (int trial = 0; trial < 3; ++trial) {
    Vector logp(4);
    for (int k = 0; k < 3; ++k) logp(k) = std::log(0.2 + 1.5 * open_uniform(rng));
    logp(3) = std::log(0.005 + 0.2 * open_uniform(rng));
    for (const auto& spec : specs) {
      const bool extra = spec.kind != NuggetKind::none;
      auto eval = [&](const Vector& lp, bool grad) {
        HyperParams hp{lp.head(3).array().exp().matrix(), 0.0, 1.0};
        if (spec.kind == NuggetKind::homoscedastic_estimated) hp.nugget_ratio = std::exp(lp(3));
        if (spec.kind == NuggetKind::homoscedastic_fixed || spec.kind == NuggetKind::heteroscedastic)
          hp.process_variance = std::exp(lp(3) + 3.0);
        return negative_log_likelihood(x, y, hp, spec, grad);
      };
      const auto res = eval(logp, true);
      REQUIRE(res.gradient.size() == (extra ? 4 : 3));
      for (Eigen::Index k = 0; k < res.gradient.size(); ++k) {
        const double h = 1e-5;
        Vector up = logp, dn = logp;
        up(k) += h;
        dn(k) -= h;
        const double fd = (eval(up, false).value - eval(dn, false).value) / (2 * h);
        CHECK(std::abs(res.gradient(k) - fd) <= 1e-4 * std::max(1.0, std::abs(fd)));
      }
    }
  }
}

TEST_CASE("fit recovers a noise-free Matern path") {
  Matrix x(60, 1);
  for (int i = 0; i < 60; ++i) x(i, 0) = (i + 0.5) / 60.0;
  Matrix xt(200, 1);
  for (int i = 0; i < 200; ++i) xt(i, 0) = (i + 0.25) / 200.0;
  Matrix all(260, 1);
  all << x, xt;
  const Vector path = gp_path(all, 0.2, 5);
  FitOptions opts;
  opts.restarts = 3;
  const GpModel gp = fit_gp(x, path.head(60), {0}, NuggetSpec::estimated(), opts, 1);
  CHECK(q2(path.tail(200), gp.predict_mean(xt)) >= 0.99);
  CHECK(loo_q2(gp) >= 0.99);

  // A warm start at the optimum cannot lose to random starts.
  FitOptions warm = opts;
  warm.init_lengthscales = gp.kernel().lengthscales;
  warm.init_nugget_ratio = gp.nugget().variance / gp.kernel().process_variance;
  const GpModel again = fit_gp(x, path.head(60), {0}, NuggetSpec::estimated(), warm, 2);
  CHECK(again.nll() <= gp.nll() + 1e-8);
}

TEST_CASE("fit is deterministic and independent of threads") {
  const Matrix x = uniform_matrix(40, 2, 21);
  const Vector y = smooth2(x);
  FitOptions opts;
  opts.restarts = 4;
  const GpModel a = fit_gp(x, y, {0, 1}, NuggetSpec::estimated(), opts, 8);
  opts.threads = 3;
  const GpModel b = fit_gp(x, y, {0, 1}, NuggetSpec::estimated(), opts, 8);
  CHECK(a.to_json() == b.to_json());
  CHECK(loo_q2(a) >= 0.99);
}

TEST_CASE("json round trip rebuilds the same predictor") {
  const Matrix x = uniform_matrix(30, 2, 31);
  const Vector y = smooth2(x);
  FitOptions opts;
  opts.restarts = 2;
  const GpModel gp = fit_gp(x, y, {4, 1}, NuggetSpec::estimated(), opts, 3);
  const GpModel back = GpModel::from_json(nlohmann::json::parse(gp.to_json().dump()));
  const Matrix pts = uniform_matrix(10, 2, 32);
  CHECK(back.active_inputs() == gp.active_inputs());
  CHECK((back.predict(pts).mean - gp.predict(pts).mean).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.predict(pts).variance - gp.predict(pts).variance).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("conditional simulation statistics") {
  Matrix x(6, 1);
  x << 0.0, 0.2, 0.4, 0.6, 0.8, 1.0;
  const Vector y = (x.array() * 4.0).sin().matrix();
  const Vector theta = Vector::Constant(1, 0.3);
  const auto nll = negative_log_likelihood(x, y, {theta, 0.0, 1.0}, NuggetSpec::fixed(0.0));
  const GpModel gp({0}, x, y, nll.trend, {theta, 1.0}, NuggetSpec::none());

  Matrix pts(5, 1);
  pts << 0.1, 0.33, 0.5, 0.77, 1.2;
  const int n = 10000;
  const Matrix traj = conditional_simulate(gp, pts, n, 4);
  const auto pred = gp.predict(pts);
  const Vector emp_mean = traj.colwise().mean();
  for (int j = 0; j < 5; ++j) {
    const double se = std::sqrt(pred.variance(j) / n);
    CHECK(std::abs(emp_mean(j) - pred.mean(j)) <= 4.0 * se);
  }
  CHECK(conditional_simulate(gp, pts, 50, 4) == conditional_simulate(gp, pts, 50, 4));

  // Training points reproduce the observations.
  const Matrix at_train = conditional_simulate(gp, x, 20, 5);
  for (int t = 0; t < 20; ++t) CHECK((at_train.row(t).transpose() - y).cwiseAbs().maxCoeff() <= 1e-6);

  // Extra diagonal adds to the variance.
  const Vector extra = Vector::Constant(5, 0.25);
  const Matrix with_extra = conditional_simulate(gp, pts, n, 6, extra);
  for (int j = 0; j < 5; ++j) {
    const Vector col = with_extra.col(j);
    const double var = (col.array() - col.mean()).square().sum() / (n - 1);
    const double expect = pred.variance(j) + 0.25;
    CHECK(std::abs(var - expect) <= 5.0 * expect * std::sqrt(2.0 / n));
  }

  // Sample covariance error shrinks roughly like 1/sqrt(n_traj).
  const Matrix cov = gp.conditional_covariance(pts);
  auto frob = [&](int m, std::uint64_t seed) {
    const Matrix t = conditional_simulate(gp, pts, m, seed);
    const Matrix centered = t.rowwise() - t.colwise().mean();
    return (centered.transpose() * centered / (m - 1.0) - cov).norm();
  };
  double e_small = 0.0, e_big = 0.0;
  for (std::uint64_t s = 0; s < 10; ++s) {
    e_small += frob(400, 100 + s);
    e_big += frob(6400, 200 + s);
  }
  CHECK(e_big < e_small / 2.0);
  CHECK(e_big > e_small / 8.0);

  CHECK_THROWS_AS(conditional_simulate(gp, pts, 10, 1, Vector::Constant(2, 0.1)), DataError);
  CHECK_THROWS(conditional_simulate(gp, pts, 10, 1, std::nullopt, 3));
}

}

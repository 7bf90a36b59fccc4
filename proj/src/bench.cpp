#include "uqpipe/bench.hpp"

#include <cmath>
#include <numbers>

#include "uqpipe/errors.hpp"

namespace uqpipe::bench {

namespace {

constexpr double kPi = std::numbers::pi;

std::vector<Marginal> uniform_marginals(int d, double lo, double hi) {
  std::vector<Marginal> out;
  for (int k = 0; k < d; ++k) out.push_back(Marginal::uniform("X" + std::to_string(k + 1), lo, hi));
  return out;
}

}  // namespace

double ishigami(const Vector& x, double a, double b) {
  if (x.size() != 3) throw DataError("ishigami: expected 3 inputs");
  const double s1 = std::sin(x(0));
  const double s2 = std::sin(x(1));
  const double x3 = x(2);
  return s1 + a * s2 * s2 + b * x3 * x3 * x3 * x3 * s1;
}

double gfunction(const Vector& x, const Vector& a) {
  if (x.size() != a.size()) throw DataError("gfunction: coefficient count does not match dimension");
  double prod = 1.0;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    if (a(k) < 0.0) throw ConfigError("gfunction: coefficients must be >= 0");
    prod *= (std::abs(4.0 * x(k) - 2.0) + a(k)) / (1.0 + a(k));
  }
  return prod;
}

double hetero_ishigami(const Vector& x) {
  if (x.size() != 11) throw DataError("hetero_ishigami: expected 11 inputs");
  // Var U(-pi,pi) = pi^2/3, so x_k * sqrt(3)/pi has unit variance.
  const double unit = std::sqrt(3.0) / kPi;
  double w = 0.0;
  for (Eigen::Index k = 3; k < 11; ++k) w += x(k) * unit;
  w /= std::sqrt(8.0);
  return ishigami(x.head(3)) + 0.3 * (1.0 + std::sin(x(1))) * w;
}

double hetero_ishigami_mean(const Vector& x_exp) { return ishigami(x_exp.head(3)); }

double hetero_ishigami_dispersion(const Vector& x_exp) {
  if (x_exp.size() < 2) throw DataError("hetero_ishigami_dispersion: expected x1, x2[, x3]");
  const double f = 1.0 + std::sin(x_exp(1));
  return 0.09 * f * f;
}

Vector default_gfunction_coefficients() {
  Vector a = Vector::Constant(15, 99.0);
  a(0) = 0.0;
  a(1) = 1.0;
  a(2) = 4.5;
  a(3) = 9.0;
  return a;
}

IshigamiIndices ishigami_indices(double a, double b) {
  const double pi4 = std::pow(kPi, 4);
  const double pi8 = pi4 * pi4;
  IshigamiIndices r{};
  const double v1 = 0.5 * std::pow(1.0 + b * pi4 / 5.0, 2);
  const double v2 = a * a / 8.0;
  const double v13 = b * b * pi8 * (1.0 / 18.0 - 1.0 / 50.0);
  r.variance = v1 + v2 + v13;
  r.s1 = v1 / r.variance;
  r.s2 = v2 / r.variance;
  r.s3 = 0.0;
  r.s12 = 0.0;
  r.s13 = v13 / r.variance;
  r.s23 = 0.0;
  r.st1 = r.s1 + r.s13;
  r.st2 = r.s2;
  r.st3 = r.s13;
  return r;
}

Vector gfunction_first_order(const Vector& a) {
  Vector partial(a.size());
  double log_total = 0.0;
  for (Eigen::Index k = 0; k < a.size(); ++k) {
    if (a(k) < 0.0) throw ConfigError("g-function coefficients must be >= 0");
    partial(k) = 1.0 / (3.0 * (1.0 + a(k)) * (1.0 + a(k)));
    log_total += std::log1p(partial(k));
  }
  // expm1 keeps the denominator accurate when every factor is nearly inert.
  return partial / std::expm1(log_total);
}

Vector BenchFunction::evaluate_rows(const Matrix& x) const {
  Vector y(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) y(i) = evaluate(x.row(i).transpose());
  return y;
}

BenchFunction make_ishigami() {
  return {"ishigami", InputSpace(uniform_marginals(3, -kPi, kPi)),
          [](const Vector& x) { return ishigami(x); }};
}

BenchFunction make_gfunction(const Vector& a) {
  for (Eigen::Index k = 0; k < a.size(); ++k)
    if (a(k) < 0.0) throw ConfigError("gfunction: coefficients must be >= 0");
  return {"gfunction", InputSpace(uniform_marginals(static_cast<int>(a.size()), 0.0, 1.0)),
          [a](const Vector& x) { return gfunction(x, a); }};
}

BenchFunction make_hetero_ishigami() {
  return {"hetero-ishigami", InputSpace(uniform_marginals(11, -kPi, kPi)),
          [](const Vector& x) { return hetero_ishigami(x); }};
}

BenchFunction make_bench(const std::string& name) {
  if (name == "ishigami") return make_ishigami();
  if (name == "gfunction") return make_gfunction();
  if (name == "hetero-ishigami") return make_hetero_ishigami();
  throw ConfigError("unknown benchmark model '" + name + "' (expected ishigami|gfunction|hetero-ishigami)");
}

std::vector<std::string> bench_names() { return {"ishigami", "gfunction", "hetero-ishigami"}; }

}  // namespace uqpipe::bench

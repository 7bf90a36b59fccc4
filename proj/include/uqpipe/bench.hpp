#pragma once

#include <functional>
#include <string>
#include <vector>

#include "uqpipe/input_space.hpp"
#include "uqpipe/types.hpp"

namespace uqpipe::bench {

/// sin x1 + a sin^2 x2 + b x3^4 sin x1 (a = 7, b = 0.1 by default).
double ishigami(const Vector& x, double a = 7.0, double b = 0.1);

/// prod_k (|4 x_k - 2| + a_k) / (1 + a_k) on [0,1]^d.
double gfunction(const Vector& x, const Vector& a);

/// Ishigami on (x1,x2,x3) plus 0.3 (1 + sin x2) W, where W is the unit-variance
/// standardized mean of x4..x11 ~ U(-pi, pi).
double hetero_ishigami(const Vector& x);

/// Conditional mean E[Y | x1,x2,x3] of hetero_ishigami.
double hetero_ishigami_mean(const Vector& x_exp);
/// Conditional variance Var[Y | x1,x2,x3] of hetero_ishigami.
double hetero_ishigami_dispersion(const Vector& x_exp);

/// Screening coefficients (0, 1, 4.5, 9, 99 x 11).
Vector default_gfunction_coefficients();

struct IshigamiIndices {
  double variance;
  double s1, s2, s3;
  double s12, s13, s23;
  double st1, st2, st3;
};

/// Closed-form Sobol' decomposition of the Ishigami function under U(-pi,pi)^3.
IshigamiIndices ishigami_indices(double a = 7.0, double b = 0.1);

/// Closed-form first-order indices of the g-function.
Vector gfunction_first_order(const Vector& a);

/// A registered benchmark: input space plus pure evaluator.
struct BenchFunction {
  std::string name;
  InputSpace space;
  std::function<double(const Vector&)> evaluate;

  Vector evaluate_rows(const Matrix& x) const;
};

BenchFunction make_ishigami();
BenchFunction make_gfunction(const Vector& a = default_gfunction_coefficients());
BenchFunction make_hetero_ishigami();

/// "ishigami" | "gfunction" | "hetero-ishigami".
BenchFunction make_bench(const std::string& name);
std::vector<std::string> bench_names();

}  // namespace uqpipe::bench

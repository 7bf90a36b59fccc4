#pragma once

#include <functional>

#include "uqpipe/types.hpp"

namespace uqpipe {

/// Objective returning f(x); fills `grad` when non-null.
using Objective = std::function<double(const Vector& x, Vector* grad)>;

struct BoxOptions {
  int max_iterations = 200;
  double gradient_tolerance = 1e-6;
  double function_tolerance = 1e-10;
  /// Largest step (infinity norm) tried by the line search.
  double max_step = 2.0;
};

struct BoxResult {
  Vector x;
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Projected BFGS with Armijo backtracking on the box [lower, upper].
/// Points where the objective throws NumericalError are treated as
/// infeasible by the line search; a failure at the start point propagates.
BoxResult minimize_box(const Objective& f, const Vector& x0, const Vector& lower,
                       const Vector& upper, const BoxOptions& options = {});

}  // namespace uqpipe

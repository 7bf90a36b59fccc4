#include "uqpipe/optimize.hpp"

#include <cmath>
#include <limits>

#include "uqpipe/errors.hpp"

namespace uqpipe {

namespace {

Vector project(const Vector& x, const Vector& lower, const Vector& upper) {
  return x.cwiseMax(lower).cwiseMin(upper);
}

// Coordinates pinned at a bound with the gradient pointing outward.
Eigen::Array<bool, Eigen::Dynamic, 1> free_mask(const Vector& x, const Vector& g,
                                                const Vector& lower, const Vector& upper) {
  Eigen::Array<bool, Eigen::Dynamic, 1> mask(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const bool at_lower = x(i) <= lower(i) && g(i) > 0.0;
    const bool at_upper = x(i) >= upper(i) && g(i) < 0.0;
    mask(i) = !(at_lower || at_upper);
  }
  return mask;
}

}  // namespace

BoxResult minimize_box(const Objective& f, const Vector& x0, const Vector& lower,
                       const Vector& upper, const BoxOptions& options) {
  const auto dim = x0.size();
  BoxResult result;
  result.x = project(x0, lower, upper);
  Vector g(dim);
  result.value = f(result.x, &g);
  if (!std::isfinite(result.value)) throw NumericalError("objective is not finite at the start point");

  Matrix h = Matrix::Identity(dim, dim);
  for (int it = 0; it < options.max_iterations; ++it) {
    result.iterations = it + 1;
    const auto mask = free_mask(result.x, g, lower, upper);
    Vector gf = g;
    for (Eigen::Index i = 0; i < dim; ++i)
      if (!mask(i)) gf(i) = 0.0;
    if (gf.lpNorm<Eigen::Infinity>() < options.gradient_tolerance) {
      result.converged = true;
      break;
    }

    Vector d = -(h * gf);
    for (Eigen::Index i = 0; i < dim; ++i)
      if (!mask(i)) d(i) = 0.0;
    if (gf.dot(d) >= 0.0) {
      h.setIdentity();
      d = -gf;
    }
    const double dmax = d.lpNorm<Eigen::Infinity>();
    if (dmax > options.max_step) d *= options.max_step / dmax;

    bool accepted = false;
    Vector x_new, g_new(dim);
    double f_new = 0.0;
    for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
      double t = 1.0;
      for (int ls = 0; ls < 40; ++ls, t *= 0.5) {
        x_new = project(result.x + t * d, lower, upper);
        const Vector step = x_new - result.x;
        if (step.lpNorm<Eigen::Infinity>() == 0.0) break;
        try {
          f_new = f(x_new, &g_new);
        } catch (const NumericalError&) {
          continue;
        }
        if (std::isfinite(f_new) && f_new <= result.value + 1e-4 * g.dot(step)) {
          accepted = true;
          break;
        }
      }
      if (!accepted) {
        // Retry once along steepest descent.
        h.setIdentity();
        d = -gf;
        const double m = d.lpNorm<Eigen::Infinity>();
        if (m > options.max_step) d *= options.max_step / m;
      }
    }
    if (!accepted) break;

    const Vector s = x_new - result.x;
    const Vector y = g_new - g;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      const double rho = 1.0 / sy;
      const Matrix eye = Matrix::Identity(dim, dim);
      h = (eye - rho * s * y.transpose()) * h * (eye - rho * y * s.transpose()) +
          rho * s * s.transpose();
    }
    const double change = result.value - f_new;
    result.x = x_new;
    result.value = f_new;
    g = g_new;
    if (change < options.function_tolerance * (1.0 + std::abs(result.value))) {
      result.converged = true;
      break;
    }
  }
  return result;
}

}  // namespace uqpipe

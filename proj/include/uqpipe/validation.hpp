#pragma once

#include <vector>

#include "uqpipe/gp.hpp"
#include "uqpipe/types.hpp"

namespace uqpipe {

class JointGpModel;

/// Predictivity coefficient 1 - sum (y - yhat)^2 / sum (y - ybar)^2.
double q2(const Vector& y_obs, const Vector& y_pred);

/// Q2 of the virtual leave-one-out predictions (no refit).
double loo_q2(const GpModel& gp);
/// Q2 of the heteroscedastic mean GP's leave-one-out predictions.
double loo_q2(const JointGpModel& joint);

struct CoverageCurve {
  std::vector<double> alphas;
  std::vector<double> observed;

  /// max over alpha of |observed - alpha|.
  double max_deviation() const;
};

/// 0.05, 0.10, ..., 0.95, 0.99.
std::vector<double> default_alpha_grid();

/// Fraction of observations inside mean +- z_{(1+a)/2} sqrt(variance), per a.
CoverageCurve coverage_curve(const Vector& y_obs, const Vector& mean, const Vector& variance,
                             const std::vector<double>& alphas = default_alpha_grid());

/// Coverage of a plain GP on a test sample given in full input coordinates.
/// The total predictive variance adds the homoscedastic nugget when present.
CoverageCurve coverage_curve(const GpModel& gp, const LearningSample& test,
                             const std::vector<double>& alphas = default_alpha_grid());

}  // namespace uqpipe

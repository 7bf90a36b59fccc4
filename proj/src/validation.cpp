#include "uqpipe/validation.hpp"

#include <algorithm>
#include <cmath>

#include "uqpipe/errors.hpp"
#include "uqpipe/input_space.hpp"
#include "uqpipe/joint_gp.hpp"

namespace uqpipe {

double q2(const Vector& y_obs, const Vector& y_pred) {
  if (y_obs.size() != y_pred.size()) throw DataError("q2: vectors have different lengths");
  if (y_obs.size() < 2) throw DataError("q2: at least two observations are required");
  const double ss_tot = (y_obs.array() - y_obs.mean()).square().sum();
  if (!(ss_tot > 0.0)) throw DataError("q2: observed outputs are constant");
  return 1.0 - (y_obs - y_pred).squaredNorm() / ss_tot;
}

double loo_q2(const GpModel& gp) { return q2(gp.y(), gp.leave_one_out().mean); }

double loo_q2(const JointGpModel& joint) { return loo_q2(joint.gp_m2()); }

double CoverageCurve::max_deviation() const {
  double worst = 0.0;
  for (std::size_t i = 0; i < alphas.size(); ++i) worst = std::max(worst, std::abs(observed[i] - alphas[i]));
  return worst;
}

std::vector<double> default_alpha_grid() {
  std::vector<double> grid;
  for (int i = 1; i <= 19; ++i) grid.push_back(0.05 * i);
  grid.push_back(0.99);
  return grid;
}

CoverageCurve coverage_curve(const Vector& y_obs, const Vector& mean, const Vector& variance,
                             const std::vector<double>& alphas) {
  if (y_obs.size() != mean.size() || y_obs.size() != variance.size())
    throw DataError("coverage_curve: vectors have different lengths");
  if (y_obs.size() == 0) throw DataError("coverage_curve: empty test sample");
  std::vector<double> sorted = alphas;
  std::sort(sorted.begin(), sorted.end());
  CoverageCurve curve;
  const auto m = static_cast<double>(y_obs.size());
  for (double a : sorted) {
    if (!(a > 0.0 && a < 1.0)) throw ConfigError("coverage_curve: alpha must lie in (0,1)");
    const double z = normal_quantile(0.5 * (1.0 + a));
    int inside = 0;
    for (Eigen::Index i = 0; i < y_obs.size(); ++i)
      if (std::abs(y_obs(i) - mean(i)) <= z * std::sqrt(std::max(variance(i), 0.0))) ++inside;
    curve.alphas.push_back(a);
    curve.observed.push_back(inside / m);
  }
  return curve;
}

CoverageCurve coverage_curve(const GpModel& gp, const LearningSample& test,
                             const std::vector<double>& alphas) {
  const PredictResult pred = gp.predict(select_columns(test.x, gp.active_inputs()));
  Vector total = pred.variance;
  if (gp.nugget().kind == NuggetKind::homoscedastic_estimated ||
      gp.nugget().kind == NuggetKind::homoscedastic_fixed)
    total.array() += gp.nugget().variance;
  return coverage_curve(test.y, pred.mean, total, alphas);
}

}  // namespace uqpipe

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "uqpipe/gp.hpp"
#include "uqpipe/screening.hpp"
#include "uqpipe/types.hpp"
#include "uqpipe/validation.hpp"

namespace uqpipe {

struct JointGpConfig {
  FitOptions fit;
  /// dispersion floor = floor_fraction * empirical Var(Y)
  double floor_fraction = 1e-6;
  /// Stop adding PII once the LOO Q2 gain stays below early_stop_gain twice.
  bool early_stop = false;
  double early_stop_gain = 0.005;
};

/// One sequential inclusion step of the mean GP.
struct BuildStep {
  int input = 0;
  std::string name;
  Vector warm_start;  // lengthscales the step's optimization started from
  double loo_q2 = 0.0;
  double nll = 0.0;
  double warm_start_nll = 0.0;
};

struct BuildTrace {
  std::vector<BuildStep> steps;
};

/// Mean / dispersion Gaussian-process pair over the explanatory inputs.
/// Points passed to the predict methods hold the PII coordinates in PII
/// order; the *_full variants take rows of the full input vector.
class JointGpModel {
 public:
  JointGpModel(IndexList pii, IndexList eps_group, GpModel gp_m1, GpModel gp_v1, GpModel gp_m2,
               GpModel gp_v2, double dispersion_floor);

  const IndexList& pii() const { return pii_; }
  const IndexList& eps_group() const { return eps_; }
  const GpModel& gp_m1() const { return gp_m1_; }
  const GpModel& gp_v1() const { return gp_v1_; }
  const GpModel& gp_m2() const { return gp_m2_; }
  const GpModel& gp_v2() const { return gp_v2_; }
  double dispersion_floor() const { return floor_; }

  /// Heteroscedastic mean GP prediction; variance excludes the nugget.
  PredictResult predict_mean(const Matrix& points) const;
  Vector predict_mean_only(const Matrix& points) const;
  /// Dispersion GP prediction clamped below at the floor.
  Vector predict_dispersion(const Matrix& points) const;

  PredictResult predict_mean_full(const Matrix& full_points) const;
  Vector predict_dispersion_full(const Matrix& full_points) const;

  nlohmann::json to_json() const;
  static JointGpModel from_json(const nlohmann::json& doc);

 private:
  IndexList pii_;
  IndexList eps_;
  GpModel gp_m1_, gp_v1_, gp_m2_, gp_v2_;
  double floor_;
};

struct JointBuild {
  JointGpModel model;
  BuildTrace trace;
};

/// Sequential construction: homoscedastic mean GPs over the first j ranked
/// PII (warm-started), dispersion GP on squared leave-one-out residuals,
/// heteroscedastic mean refit, dispersion update.
JointBuild build_joint(const LearningSample& sample, const ScreeningReport& screening,
                       const JointGpConfig& config, std::uint64_t seed);

/// Same, with an explicit ordered explanatory-input list.
JointBuild build_joint(const LearningSample& sample, const IndexList& ranked_pii,
                       const JointGpConfig& config, std::uint64_t seed);

/// Coverage of the heteroscedastic joint model (mean variance + dispersion).
CoverageCurve coverage_curve(const JointGpModel& joint, const LearningSample& test,
                             const std::vector<double>& alphas = default_alpha_grid());

/// Coverage of the homoscedastic mean GP (gp_m1 variance + its nugget).
CoverageCurve coverage_curve_homoscedastic(const JointGpModel& joint, const LearningSample& test,
                                           const std::vector<double>& alphas = default_alpha_grid());

}  // namespace uqpipe

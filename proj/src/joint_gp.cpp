#include "uqpipe/joint_gp.hpp"

#include <algorithm>
#include <limits>
#include <set>

#include "uqpipe/errors.hpp"
#include "uqpipe/rng.hpp"

namespace uqpipe {

namespace {

[[noreturn]] void rethrow_tagged(const Error& e, const std::string& stage) {
  const std::string msg = "[" + stage + "] " + e.what();
  switch (e.exit_code()) {
    case 2: throw ConfigError(msg);
    case 3: throw DataError(msg);
    default: throw NumericalError(msg);
  }
}

template <typename Fn>
auto tagged(const std::string& stage, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    rethrow_tagged(e, stage);
  }
}

Vector squared_loo_residuals(const GpModel& gp) {
  return (gp.y() - gp.leave_one_out().mean).array().square().matrix();
}

// Constant outputs leave nothing to fit: every GP predicts its constant
// exactly (zero weights), and the dispersion sits at the floor.
JointBuild constant_joint(const LearningSample& sample, const IndexList& pii, double floor) {
  const Matrix x_pii = select_columns(sample.x, pii);
  Vector theta(x_pii.cols());
  for (Eigen::Index k = 0; k < x_pii.cols(); ++k) {
    const double range = x_pii.col(k).maxCoeff() - x_pii.col(k).minCoeff();
    theta(k) = default_lengthscale(range > 0.0 ? range : 1.0);
  }
  const double c = sample.y.size() ? sample.y(0) : 0.0;
  const Vector zeros = Vector::Zero(sample.y.size());
  auto make = [&](const Vector& y, double trend, NuggetSpec nugget) {
    return GpModel(pii, x_pii, y, trend, {theta, 1.0}, std::move(nugget));
  };
  const GpModel m1 = make(sample.y, c, NuggetSpec::fixed(0.0));
  const GpModel v = make(zeros, 0.0, NuggetSpec::fixed(0.0));
  const GpModel m2 = make(sample.y, c, NuggetSpec::heteroscedastic(Vector::Constant(sample.y.size(), floor)));
  IndexList eps;
  for (int k = 0; k < sample.dimension(); ++k)
    if (std::find(pii.begin(), pii.end(), k) == pii.end()) eps.push_back(k);
  BuildTrace trace;
  for (int input : pii) {
    BuildStep step;
    step.input = input;
    step.name = input < static_cast<int>(sample.names.size()) ? sample.names[static_cast<std::size_t>(input)]
                                                              : "X" + std::to_string(input + 1);
    step.warm_start = theta.head(static_cast<Eigen::Index>(trace.steps.size() + 1));
    step.loo_q2 = std::numeric_limits<double>::quiet_NaN();  // undefined for constant outputs
    trace.steps.push_back(step);
  }
  return {JointGpModel(pii, eps, m1, v, m2, v, floor), std::move(trace)};
}

}  // namespace


JointGpModel::JointGpModel(IndexList pii, IndexList eps_group, GpModel gp_m1, GpModel gp_v1,
                           GpModel gp_m2, GpModel gp_v2, double dispersion_floor)
    : pii_(std::move(pii)),
      eps_(std::move(eps_group)),
      gp_m1_(std::move(gp_m1)),
      gp_v1_(std::move(gp_v1)),
      gp_m2_(std::move(gp_m2)),
      gp_v2_(std::move(gp_v2)),
      floor_(dispersion_floor) {
  if (pii_.empty()) throw DataError("joint model needs at least one explanatory input");
  std::set<int> seen(pii_.begin(), pii_.end());
  for (int k : eps_)
    if (!seen.insert(k).second) throw DataError("explanatory and uncontrollable groups overlap");
  for (const GpModel* gp : {&gp_m1_, &gp_v1_, &gp_m2_, &gp_v2_})
    if (gp->active_inputs() != pii_) throw DataError("joint model GPs must share the explanatory inputs");
  if (!(floor_ > 0.0)) throw ConfigError("dispersion floor must be > 0");
}

PredictResult JointGpModel::predict_mean(const Matrix& points) const { return gp_m2_.predict(points); }

Vector JointGpModel::predict_mean_only(const Matrix& points) const { return gp_m2_.predict_mean(points); }

Vector JointGpModel::predict_dispersion(const Matrix& points) const {
  return gp_v2_.predict_mean(points).cwiseMax(floor_);
}

PredictResult JointGpModel::predict_mean_full(const Matrix& full_points) const {
  return predict_mean(select_columns(full_points, pii_));
}

Vector JointGpModel::predict_dispersion_full(const Matrix& full_points) const {
  return predict_dispersion(select_columns(full_points, pii_));
}

nlohmann::json JointGpModel::to_json() const {
  return {{"format", "uqpipe-joint-gp"},
          {"version", 1},
          {"pii", pii_},
          {"eps_group", eps_},
          {"dispersion_floor", floor_},
          {"gp_m1", gp_m1_.to_json()},
          {"gp_v1", gp_v1_.to_json()},
          {"gp_m2", gp_m2_.to_json()},
          {"gp_v2", gp_v2_.to_json()}};
}

JointGpModel JointGpModel::from_json(const nlohmann::json& doc) {
  try {
    if (doc.at("format").get<std::string>() != "uqpipe-joint-gp")
      throw DataError("not a uqpipe joint GP document");
    return JointGpModel(doc.at("pii").get<IndexList>(), doc.at("eps_group").get<IndexList>(),
                        GpModel::from_json(doc.at("gp_m1")), GpModel::from_json(doc.at("gp_v1")),
                        GpModel::from_json(doc.at("gp_m2")), GpModel::from_json(doc.at("gp_v2")),
                        doc.at("dispersion_floor").get<double>());
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed joint GP document: ") + e.what());
  }
}

JointBuild build_joint(const LearningSample& sample, const ScreeningReport& screening,
                       const JointGpConfig& config, std::uint64_t seed) {
  return build_joint(sample, screening.pii(), config, seed);
}

JointBuild build_joint(const LearningSample& sample, const IndexList& ranked_pii,
                       const JointGpConfig& config, std::uint64_t seed) {
  if (ranked_pii.empty()) throw DataError("build_joint: screening selected no explanatory input");
  if (sample.x.rows() != sample.y.size()) throw DataError("build_joint: X and Y row counts differ");
  for (int k : ranked_pii)
    if (k < 0 || k >= sample.dimension()) throw DataError("build_joint: PII index out of range");

  const double var_y = sample_variance(sample.y);
  const double floor = std::max(config.floor_fraction * var_y, std::numeric_limits<double>::min());
  if (!(var_y > 0.0)) return constant_joint(sample, ranked_pii, floor);

  BuildTrace trace;
  IndexList included;
  std::optional<GpModel> current;
  int small_gains = 0;
  for (std::size_t j = 0; j < ranked_pii.size(); ++j) {
    const int input = ranked_pii[j];
    included.push_back(input);
    const Matrix xj = select_columns(sample.x, included);
    FitOptions opts = config.fit;
    Vector warm(static_cast<Eigen::Index>(included.size()));
    if (current) {
      warm.head(current->dimension()) = current->kernel().lengthscales;
      opts.init_nugget_ratio = current->nugget().variance / current->kernel().process_variance;
    } else {
      opts.init_nugget_ratio = 1e-3;
    }
    const double new_range = xj.col(xj.cols() - 1).maxCoeff() - xj.col(xj.cols() - 1).minCoeff();
    warm(warm.size() - 1) = default_lengthscale(new_range);
    opts.init_lengthscales = warm;

    const std::string stage = "gp_m1 step " + std::to_string(j + 1);
    GpModel gp = tagged(stage, [&] {
      return fit_gp(xj, sample.y, included, NuggetSpec::estimated(), opts, derive_seed(seed, "gp_m1", j));
    });

    BuildStep step;
    step.input = input;
    step.name = input < static_cast<int>(sample.names.size()) ? sample.names[static_cast<std::size_t>(input)]
                                                              : "X" + std::to_string(input + 1);
    step.warm_start = warm;
    step.nll = gp.nll();
    step.loo_q2 = tagged(stage, [&] { return loo_q2(gp); });
    try {
      HyperParams hp{warm, *opts.init_nugget_ratio, 1.0};
      step.warm_start_nll = negative_log_likelihood(xj, sample.y, hp, NuggetSpec::estimated()).value;
    } catch (const NumericalError&) {
      step.warm_start_nll = std::numeric_limits<double>::infinity();
    }
    const double gain = trace.steps.empty() ? 1.0 : step.loo_q2 - trace.steps.back().loo_q2;
    trace.steps.push_back(step);
    current = std::move(gp);

    if (config.early_stop) {
      small_gains = gain < config.early_stop_gain ? small_gains + 1 : 0;
      if (small_gains >= 2) break;
    }
  }

  const GpModel gp_m1 = std::move(*current);
  const IndexList pii = included;
  IndexList eps;
  for (int k = 0; k < sample.dimension(); ++k)
    if (std::find(pii.begin(), pii.end(), k) == pii.end()) eps.push_back(k);

  const Matrix x_pii = select_columns(sample.x, pii);

  FitOptions disp_opts = config.fit;
  disp_opts.init_lengthscales = gp_m1.kernel().lengthscales;
  disp_opts.init_nugget_ratio.reset();

  const Vector r1 = squared_loo_residuals(gp_m1);
  const GpModel gp_v1 = tagged("gp_v1", [&] {
    return fit_gp(x_pii, r1, pii, NuggetSpec::estimated(), disp_opts, derive_seed(seed, "gp_v1"));
  });

  const Vector nugget = gp_v1.predict_mean(x_pii).cwiseMax(floor);
  FitOptions mean_opts = config.fit;
  mean_opts.init_lengthscales = gp_m1.kernel().lengthscales;
  const GpModel gp_m2 = tagged("gp_m2", [&] {
    return fit_gp(x_pii, sample.y, pii, NuggetSpec::heteroscedastic(nugget), mean_opts,
                  derive_seed(seed, "gp_m2"));
  });

  const Vector r2 = squared_loo_residuals(gp_m2);
  disp_opts.init_lengthscales = gp_v1.kernel().lengthscales;
  disp_opts.init_nugget_ratio = gp_v1.nugget().variance / gp_v1.kernel().process_variance;
  const GpModel gp_v2 = tagged("gp_v2", [&] {
    return fit_gp(x_pii, r2, pii, NuggetSpec::estimated(), disp_opts, derive_seed(seed, "gp_v2"));
  });

  return {JointGpModel(pii, eps, gp_m1, gp_v1, gp_m2, gp_v2, floor), std::move(trace)};
}

CoverageCurve coverage_curve(const JointGpModel& joint, const LearningSample& test,
                             const std::vector<double>& alphas) {
  const PredictResult pred = joint.predict_mean_full(test.x);
  const Vector total = pred.variance + joint.predict_dispersion_full(test.x);
  return coverage_curve(test.y, pred.mean, total, alphas);
}

CoverageCurve coverage_curve_homoscedastic(const JointGpModel& joint, const LearningSample& test,
                                           const std::vector<double>& alphas) {
  return coverage_curve(joint.gp_m1(), test, alphas);
}

}  // namespace uqpipe

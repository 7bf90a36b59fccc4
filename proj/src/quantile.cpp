#include "uqpipe/quantile.hpp"

#include <algorithm>
#include <cmath>

#include "uqpipe/design.hpp"
#include "uqpipe/errors.hpp"
#include "uqpipe/rng.hpp"

namespace uqpipe {

namespace {

void check_probability(double p) {
  if (!(p > 0.0 && p < 1.0)) throw ConfigError("quantile level p must be in (0,1)");
}

void check_level(double level) {
  if (!(level > 0.0 && level < 1.0)) throw ConfigError("confidence level must be in (0,1)");
}

double sorted_quantile(const std::vector<double>& sorted, double p) {
  const auto n = static_cast<double>(sorted.size());
  // Guard against n p landing a hair above an integer through rounding.
  auto rank = static_cast<long>(std::ceil(n * p - 1e-9 * n));
  rank = std::clamp(rank, 1L, static_cast<long>(sorted.size()));
  return sorted[static_cast<std::size_t>(rank - 1)];
}

std::vector<double> sorted_copy(const Vector& v) {
  std::vector<double> s(v.data(), v.data() + v.size());
  std::sort(s.begin(), s.end());
  return s;
}

}  // namespace

double empirical_quantile(const Vector& values, double p) {
  check_probability(p);
  if (values.size() == 0) throw DataError("empirical_quantile: empty sample");
  return sorted_quantile(sorted_copy(values), p);
}

std::pair<double, double> bootstrap_quantile_ci(const Vector& values, double p, int resamples, double level,
                                                std::uint64_t seed) {
  check_probability(p);
  check_level(level);
  if (resamples < 500) throw ConfigError("bootstrap quantile interval needs B >= 500");
  if (values.size() == 0) throw DataError("bootstrap_quantile_ci: empty sample");
  const auto n = static_cast<std::uint64_t>(values.size());
  Rng rng(seed);
  std::vector<double> draw(static_cast<std::size_t>(n));
  Vector estimates(resamples);
  for (int b = 0; b < resamples; ++b) {
    for (auto& v : draw) v = values(static_cast<Eigen::Index>(uniform_index(rng, n)));
    std::sort(draw.begin(), draw.end());
    estimates(b) = sorted_quantile(draw, p);
  }
  const auto sorted = sorted_copy(estimates);
  return {sorted_quantile(sorted, 0.5 * (1.0 - level)), sorted_quantile(sorted, 0.5 * (1.0 + level))};
}

double plugin_quantile(const BatchFunction& f, const InputSpace& space, double p, int n, std::uint64_t seed) {
  check_probability(p);
  if (n < 10000) throw ConfigError("plug-in quantile needs N >= 10000");
  const Matrix x = space.sample(n, seed);
  const Vector y = f(x);
  if (y.size() != n) throw DataError("plug-in quantile: function returned the wrong number of values");
  return empirical_quantile(y, p);
}

std::string noise_mode_name(NoiseMode mode) {
  return mode == NoiseMode::homoscedastic ? "homoscedastic" : "heteroscedastic";
}

FullGpQuantile fullgp_quantile(const GpModel& gp, const InputSpace& space, double p,
                               const std::function<Vector(const Matrix&)>& noise,
                               const FullGpSettings& settings, std::uint64_t seed) {
  check_probability(p);
  check_level(settings.level);
  if (settings.n_traj < 200) throw ConfigError("full-GP quantile needs at least 200 trajectories");
  if (settings.n_points < 2) throw ConfigError("full-GP quantile needs at least 2 input points");
  if (space.dimension() != gp.dimension()) throw DataError("full-GP quantile: input space does not match the GP");

  DesignMatrix design = lhs(settings.n_points, space.dimension(), derive_seed(seed, "inputs"));
  const Matrix x = space.transform(design.unit_points);
  Vector extra = noise(x);
  if (extra.size() != x.rows()) throw DataError("full-GP quantile: noise vector has the wrong length");
  extra = extra.cwiseMax(0.0);

  const Matrix traj = conditional_simulate(gp, x, settings.n_traj, derive_seed(seed, "trajectories"), extra,
                                           settings.max_points);
  FullGpQuantile out;
  out.trajectory_quantiles.resize(settings.n_traj);
  for (int t = 0; t < settings.n_traj; ++t) out.trajectory_quantiles(t) = empirical_quantile(traj.row(t).transpose(), p);
  out.estimate = out.trajectory_quantiles.mean();
  const auto sorted = sorted_copy(out.trajectory_quantiles);
  out.ci_low = sorted_quantile(sorted, 0.5 * (1.0 - settings.level));
  out.ci_high = sorted_quantile(sorted, 0.5 * (1.0 + settings.level));
  out.spread = std::sqrt(sample_variance(out.trajectory_quantiles));
  out.pooled = empirical_quantile(Eigen::Map<const Vector>(traj.data(), traj.size()), p);
  return out;
}

FullGpQuantile fullgp_quantile(const JointGpModel& joint, const InputSpace& space, double p, NoiseMode mode,
                               const FullGpSettings& settings, std::uint64_t seed) {
  const InputSpace sub = space.subset(joint.pii());
  if (mode == NoiseMode::homoscedastic) {
    const double tau2 = joint.gp_m1().nugget().variance;
    return fullgp_quantile(joint.gp_m1(), sub, p,
                           [tau2](const Matrix& x) { return Vector::Constant(x.rows(), tau2); }, settings, seed);
  }
  return fullgp_quantile(joint.gp_m2(), sub, p, [&joint](const Matrix& x) { return joint.predict_dispersion(x); },
                         settings, seed);
}

const QuantileEstimate& QuantileReport::find(const std::string& method) const {
  for (const auto& e : estimates)
    if (e.method == method) return e;
  throw ConfigError("quantile report has no method '" + method + "'");
}

QuantileReport quantile_analysis(const JointGpModel& joint, const InputSpace& space, const Vector& y,
                                 const QuantileOptions& options, std::uint64_t seed) {
  check_probability(options.p);
  check_level(options.level);
  QuantileReport report;
  report.p = options.p;
  report.level = options.level;

  report.estimates.push_back(
      {"empirical", empirical_quantile(y, options.p),
       bootstrap_quantile_ci(y, options.p, options.bootstrap, options.level, derive_seed(seed, "bootstrap"))});

  const InputSpace sub = space.subset(joint.pii());
  const std::uint64_t plug_seed = derive_seed(seed, "plugin");
  const GpModel& m1 = joint.gp_m1();
  report.estimates.push_back({"plugin-homoscedastic",
                              plugin_quantile([&m1](const Matrix& x) { return m1.predict_mean(x); }, sub, options.p,
                                              options.plugin_n, plug_seed),
                              std::nullopt});
  report.estimates.push_back({"plugin-heteroscedastic",
                              plugin_quantile([&joint](const Matrix& x) { return joint.predict_mean_only(x); }, sub,
                                              options.p, options.plugin_n, plug_seed),
                              std::nullopt});

  FullGpSettings fs = options.fullgp;
  fs.level = options.level;
  for (NoiseMode mode : {NoiseMode::homoscedastic, NoiseMode::heteroscedastic}) {
    const FullGpQuantile q = fullgp_quantile(joint, space, options.p, mode, fs, derive_seed(seed, "fullgp"));
    report.estimates.push_back({"fullgp-" + noise_mode_name(mode), q.estimate, std::make_pair(q.ci_low, q.ci_high)});
  }
  return report;
}

}  // namespace uqpipe

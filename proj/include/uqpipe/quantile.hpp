#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "uqpipe/gp.hpp"
#include "uqpipe/input_space.hpp"
#include "uqpipe/joint_gp.hpp"
#include "uqpipe/sensitivity.hpp"
#include "uqpipe/types.hpp"

namespace uqpipe {

/// Order statistic of rank ceil(n p), 1-based, clamped to [1, n].
double empirical_quantile(const Vector& values, double p);

/// Percentile bootstrap interval for the empirical quantile (B >= 500).
std::pair<double, double> bootstrap_quantile_ci(const Vector& values, double p, int resamples, double level,
                                                std::uint64_t seed);

/// Quantile of f over N draws from `space`.
double plugin_quantile(const BatchFunction& f, const InputSpace& space, double p, int n, std::uint64_t seed);

enum class NoiseMode { homoscedastic, heteroscedastic };

std::string noise_mode_name(NoiseMode mode);

struct FullGpSettings {
  int n_points = 2000;
  int n_traj = 1000;
  double level = 0.9;
  int max_points = 4096;
};

struct FullGpQuantile {
  double estimate = 0.0;  // mean of the per-trajectory quantiles
  double ci_low = 0.0;
  double ci_high = 0.0;
  double spread = 0.0;    // sd of the per-trajectory quantiles
  double pooled = 0.0;    // quantile of all trajectory-point values
  Vector trajectory_quantiles;
};

/// Quantile through conditional trajectories of a GP over an LHS sample of
/// `space` (the space of the GP's active inputs). Each point carries its own
/// independent noise variance from `noise`; pass zeros for a latent quantile.
FullGpQuantile fullgp_quantile(const GpModel& gp, const InputSpace& space, double p,
                               const std::function<Vector(const Matrix&)>& noise,
                               const FullGpSettings& settings, std::uint64_t seed);

/// Joint-model variants. Homoscedastic: gp_m1 plus its fitted constant nugget.
/// Heteroscedastic: gp_m2 plus the predicted dispersion. `space` is the full input space.
FullGpQuantile fullgp_quantile(const JointGpModel& joint, const InputSpace& space, double p, NoiseMode mode,
                               const FullGpSettings& settings, std::uint64_t seed);

struct QuantileEstimate {
  std::string method;
  double estimate = 0.0;
  std::optional<std::pair<double, double>> ci;
};

struct QuantileOptions {
  double p = 0.95;
  int plugin_n = 100000;
  int bootstrap = 1000;
  double level = 0.9;
  FullGpSettings fullgp;
};

struct QuantileReport {
  double p = 0.0;
  double level = 0.0;
  std::vector<QuantileEstimate> estimates;

  const QuantileEstimate& find(const std::string& method) const;
};

/// Five estimators: empirical (with bootstrap CI), plug-in homoscedastic and
/// heteroscedastic, full-GP homoscedastic and heteroscedastic (with trajectory CI).
QuantileReport quantile_analysis(const JointGpModel& joint, const InputSpace& space, const Vector& y,
                                 const QuantileOptions& options, std::uint64_t seed);

}  // namespace uqpipe

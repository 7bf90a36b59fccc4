#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "uqpipe/input_space.hpp"
#include "uqpipe/joint_gp.hpp"
#include "uqpipe/screening.hpp"
#include "uqpipe/types.hpp"

namespace uqpipe {

/// Vectorized function of input rows.
using BatchFunction = std::function<Vector(const Matrix&)>;

struct IndexEstimate {
  double estimate = 0.0;
  double std_error = 0.0;
};

struct SobolSettings {
  int n = 100000;       // Monte Carlo size per design matrix
  int bootstrap = 100;  // resamples for the standard error
  /// Denominator override; defaults to the sample variance of f(A).
  std::optional<double> variance;
};

/// Closed first-order index of the subset `u` (indices into `space`), by
/// pick-and-freeze: V_u = mean(fA fC) - mean((fA + fC)/2)^2.
IndexEstimate sobol_first(const BatchFunction& f, const InputSpace& space, const IndexList& u,
                          const SobolSettings& settings, std::uint64_t seed);

/// Second-order index S_ij = S_{ij} closed - S_i - S_j with common random numbers.
IndexEstimate sobol_second(const BatchFunction& f, const InputSpace& space, int i, int j,
                           const SobolSettings& settings, std::uint64_t seed);

/// Jansen total index of input k.
IndexEstimate sobol_total(const BatchFunction& f, const InputSpace& space, int k,
                          const SobolSettings& settings, std::uint64_t seed);

/// Joint-model forms taking full-space input indices. Indices outside the
/// explanatory group raise ConfigError (index-domain error). First and second
/// order default to Var(Y) from the variance identity, totals to Var(Y_m).
IndexEstimate sobol_first(const JointGpModel& joint, const InputSpace& space, const IndexList& u,
                          const SobolSettings& settings, std::uint64_t seed);
IndexEstimate sobol_second(const JointGpModel& joint, const InputSpace& space, int i, int j,
                           const SobolSettings& settings, std::uint64_t seed);
IndexEstimate sobol_total_pii(const JointGpModel& joint, const InputSpace& space, int k,
                              const SobolSettings& settings, std::uint64_t seed);

struct VarianceDecomposition {
  double var_mean_component = 0.0;       // Var[Y_m(X_exp)]
  double mean_dispersion_component = 0.0;  // E[Y_d(X_exp)]
  double var_y = 0.0;                    // their sum
};

/// Monte Carlo evaluation of Var(Y) = Var[Y_m] + E[Y_d] through the joint
/// model; `space` is the full input space.
VarianceDecomposition variance_decomposition(const JointGpModel& joint, const InputSpace& space, int n,
                                             std::uint64_t seed);

/// E[Y_d] / Var(Y) with a bootstrap standard error.
IndexEstimate total_index_eps(const JointGpModel& joint, const InputSpace& space, int n,
                              std::uint64_t seed, int bootstrap = 100);

/// Independence screening of the PII against the predicted dispersion at
/// the learning points. Input indices in the report are full-space indices.
ScreeningReport dispersion_sensitivity(const JointGpModel& joint, const LearningSample& sample,
                                       const ScreeningOptions& options, std::uint64_t seed);

struct SobolEntry {
  int input = 0;
  std::string name;
  IndexEstimate value;
};

struct SobolPairEntry {
  int first = 0;
  int second = 0;
  IndexEstimate value;
};

struct SobolReport {
  std::vector<SobolEntry> first;
  std::vector<SobolPairEntry> second;
  std::vector<SobolEntry> total_pii;
  IndexEstimate s_t_eps;
  double var_y_empirical = 0.0;
  VarianceDecomposition decomposition;
  int mc_size = 0;
};

struct SobolOptions {
  int n = 100000;
  int bootstrap = 100;
  /// Second-order indices are computed for pairs among the first this-many ranked PII.
  int max_second_order_inputs = 5;
};

/// Joint-model Sobol' analysis: first / second order from Y_m normalized by
/// Var(Y) from the variance identity, partial totals normalized by Var(Y_m),
/// and the total index of the uncontrollable group.
SobolReport sobol_analysis(const JointGpModel& joint, const InputSpace& space,
                           const LearningSample& sample, const SobolOptions& options, std::uint64_t seed);

/// Clamp to [0,1] for summary tables.
double clamp_index(double value);

}  // namespace uqpipe

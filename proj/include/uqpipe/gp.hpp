#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "json.hpp"

#include "uqpipe/types.hpp"

namespace uqpipe {

/// One-dimensional Matern 5/2 correlation at scaled distance h = |a-b|/theta.
double matern52(double h);

/// Anisotropic Matern 5/2 correlation: product over dimensions.
double matern_correlation(const Vector& a, const Vector& b, const Vector& lengthscales);

/// Correlation matrix between the rows of x1 and the rows of x2.
Matrix correlation_matrix(const Matrix& x1, const Matrix& x2, const Vector& lengthscales);

struct KernelParams {
  Vector lengthscales;            // one per active input
  double process_variance = 1.0;  // sigma^2
};

enum class NuggetKind {
  none,                       // interpolating, tau^2 = 0
  homoscedastic_estimated,    // tau^2 = g * sigma^2 with g fitted by likelihood
  homoscedastic_fixed,        // known constant tau^2
  heteroscedastic             // known per-training-point variances
};

std::string nugget_kind_name(NuggetKind kind);
NuggetKind parse_nugget_kind(const std::string& name);

struct NuggetSpec {
  NuggetKind kind = NuggetKind::homoscedastic_estimated;
  double variance = 0.0;  // tau^2 for homoscedastic kinds (fitted value when estimated)
  Vector variances;       // heteroscedastic per-point variances

  static NuggetSpec none() { return {NuggetKind::none, 0.0, {}}; }
  static NuggetSpec estimated() { return {NuggetKind::homoscedastic_estimated, 0.0, {}}; }
  static NuggetSpec fixed(double tau2) { return {NuggetKind::homoscedastic_fixed, tau2, {}}; }
  static NuggetSpec heteroscedastic(Vector v) { return {NuggetKind::heteroscedastic, 0.0, std::move(v)}; }

  /// Per-point noise variances for n training points.
  Vector diagonal(Eigen::Index n) const;
};

/// Free hyperparameters. `nugget_ratio` (tau^2/sigma^2) is used when the
/// nugget is estimated; `process_variance` only when the nugget is known
/// (otherwise sigma^2 is profiled out).
struct HyperParams {
  Vector lengthscales;
  double nugget_ratio = 0.0;
  double process_variance = 1.0;
};

struct LikelihoodResult {
  double value = 0.0;           // concentrated negative log-likelihood
  double trend = 0.0;           // GLS estimate of the constant trend
  double process_variance = 0;  // profiled or supplied sigma^2
  double jitter = 0.0;          // relative jitter that made the factorization succeed
  Vector gradient;              // w.r.t. log(lengthscales), then log(ratio) or log(sigma^2)
};

/// Concentrated Gaussian negative log-likelihood (trend always profiled;
/// sigma^2 profiled unless the nugget is known).
LikelihoodResult negative_log_likelihood(const Matrix& x, const Vector& y,
                                         const HyperParams& params, const NuggetSpec& nugget,
                                         bool with_gradient = false);

struct FitOptions {
  std::optional<Vector> init_lengthscales;  // warm start, tried first
  std::optional<double> init_nugget_ratio;
  double lengthscale_lower = 1e-2;  // times the input range
  double lengthscale_upper = 1e2;   // times the input range
  double nugget_ratio_lower = 1e-8;
  double nugget_ratio_upper = 1e2;
  int restarts = 5;
  int max_iterations = 200;
  int threads = 1;
};

struct PredictResult {
  Vector mean;
  Vector variance;
  double max_clamp = 0.0;  // largest negative variance clamped to zero
};

struct LooResult {
  Vector mean;      // prediction of y_i from the other n-1 points
  Vector variance;  // latent-mean variance, nugget excluded
  Vector noise;     // nugget variance at each point
};

/// Trained Gaussian process with constant trend and Matern 5/2 kernel.
/// Immutable once built; holds the factorization of its covariance matrix.
class GpModel {
 public:
  GpModel() = default;
  GpModel(IndexList active_inputs, Matrix x, Vector y, double trend, KernelParams kernel,
          NuggetSpec nugget, double nll = 0.0);

  const IndexList& active_inputs() const { return active_; }
  const Matrix& x() const { return x_; }
  const Vector& y() const { return y_; }
  double trend() const { return trend_; }
  const KernelParams& kernel() const { return kernel_; }
  const NuggetSpec& nugget() const { return nugget_; }
  double nll() const { return nll_; }
  double jitter() const { return jitter_; }
  int size() const { return static_cast<int>(y_.size()); }
  int dimension() const { return static_cast<int>(x_.cols()); }

  /// Mean and latent variance at points given in active-input coordinates.
  PredictResult predict(const Matrix& points) const;
  /// Mean only; cheaper for large batches.
  Vector predict_mean(const Matrix& points) const;
  /// Same as predict_mean but selects the active columns of full points.
  Vector predict_mean_full(const Matrix& full_points) const;

  /// Virtual leave-one-out predictions (hyperparameters and trend model kept).
  LooResult leave_one_out() const;

  /// Cross covariance sigma^2 R(points, x) with the training points.
  Matrix cross_covariance(const Matrix& points) const;
  /// Conditional (posterior) covariance of the latent process at points.
  Matrix conditional_covariance(const Matrix& points) const;

  nlohmann::json to_json() const;
  static GpModel from_json(const nlohmann::json& doc);

 private:
  void factorize();

  IndexList active_;
  Matrix x_;
  Vector y_;
  double trend_ = 0.0;
  KernelParams kernel_;
  NuggetSpec nugget_;
  double nll_ = 0.0;
  double jitter_ = 0.0;

  Eigen::LLT<Matrix> chol_;
  Vector alpha_;       // C^{-1} (y - trend)
  Vector whitened_one_;  // L^{-1} 1
  double one_cinv_one_ = 0.0;
};

/// Maximum-likelihood fit with multistart projected BFGS in log space.
/// `x` holds only the active columns; `active_inputs` records their
/// indices in the full input vector.
GpModel fit_gp(const Matrix& x, const Vector& y, const IndexList& active_inputs,
               const NuggetSpec& nugget, const FitOptions& options, std::uint64_t seed);

/// Convenience: fit on the `active_inputs` columns of a learning sample.
GpModel fit_gp(const LearningSample& sample, const IndexList& active_inputs,
               const NuggetSpec& nugget, const FitOptions& options, std::uint64_t seed);

/// Default lengthscale for a column with the given range (used for new
/// dimensions in sequential warm starts).
double default_lengthscale(double range);

/// Draws n_traj trajectories of the conditional process at `points`
/// (active-input coordinates). `extra_diag` is added to the diagonal of the
/// conditional covariance. Rows are trajectories.
Matrix conditional_simulate(const GpModel& gp, const Matrix& points, int n_traj,
                            std::uint64_t seed, const std::optional<Vector>& extra_diag = {},
                            int max_points = 4096);

}  // namespace uqpipe

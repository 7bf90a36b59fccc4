#include "uqpipe/gp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "uqpipe/errors.hpp"
#include "uqpipe/optimize.hpp"
#include "uqpipe/parallel.hpp"
#include "uqpipe/rng.hpp"

namespace uqpipe {

namespace {

constexpr double kSqrt5 = 2.2360679774997896964;
constexpr double kJitterStart = 1e-10;
constexpr double kJitterMax = 1e-4;
constexpr Eigen::Index kPredictChunk = 4096;

void check_lengthscales(const Vector& theta, Eigen::Index dim) {
  if (theta.size() != dim)
    throw DataError("lengthscale count " + std::to_string(theta.size()) + " does not match dimension " +
                    std::to_string(dim));
  for (Eigen::Index k = 0; k < theta.size(); ++k)
    if (!(theta(k) > 0.0) || !std::isfinite(theta(k)))
      throw ConfigError("lengthscales must be positive and finite");
}

// Cholesky of c itself, else of c + j * scale * I for the smallest j on the
// ladder that works.
std::pair<Eigen::LLT<Matrix>, double> factorize_with_jitter(const Matrix& c, double scale) {
  {
    Eigen::LLT<Matrix> llt(c);
    if (llt.info() == Eigen::Success) return {std::move(llt), 0.0};
  }
  Matrix work = c;
  for (double j = kJitterStart; j <= kJitterMax * 1.0000001; j *= 10.0) {
    work.diagonal() = c.diagonal().array() + j * scale;
    Eigen::LLT<Matrix> llt(work);
    if (llt.info() == Eigen::Success) return {std::move(llt), j};
  }
  throw NumericalError("covariance matrix is not positive definite after maximal jitter");
}

Vector column_ranges(const Matrix& x) {
  return (x.colwise().maxCoeff() - x.colwise().minCoeff()).transpose();
}

bool profiles_variance(NuggetKind kind) {
  return kind == NuggetKind::none || kind == NuggetKind::homoscedastic_estimated;
}

}  // namespace

double matern52(double h) {
  const double s = kSqrt5 * std::abs(h);
  return (1.0 + s + s * s / 3.0) * std::exp(-s);
}

double matern_correlation(const Vector& a, const Vector& b, const Vector& lengthscales) {
  if (a.size() != b.size()) throw DataError("matern_correlation: point dimensions differ");
  check_lengthscales(lengthscales, a.size());
  double r = 1.0;
  for (Eigen::Index k = 0; k < a.size(); ++k) r *= matern52((a(k) - b(k)) / lengthscales(k));
  return r;
}

Matrix correlation_matrix(const Matrix& x1, const Matrix& x2, const Vector& lengthscales) {
  if (x1.cols() != x2.cols()) throw DataError("correlation_matrix: column counts differ");
  check_lengthscales(lengthscales, x1.cols());
  const Vector inv = (kSqrt5 / lengthscales.array()).matrix();
  const auto p = x1.cols();
  Matrix r(x1.rows(), x2.rows());
  for (Eigen::Index j = 0; j < x2.rows(); ++j) {
    for (Eigen::Index i = 0; i < x1.rows(); ++i) {
      double poly = 1.0, total = 0.0;
      for (Eigen::Index k = 0; k < p; ++k) {
        const double s = std::abs(x1(i, k) - x2(j, k)) * inv(k);
        poly *= 1.0 + s + s * s / 3.0;
        total += s;
      }
      r(i, j) = poly * std::exp(-total);
    }
  }
  return r;
}

std::string nugget_kind_name(NuggetKind kind) {
  switch (kind) {
    case NuggetKind::none: return "none";
    case NuggetKind::homoscedastic_estimated: return "homoscedastic-estimated";
    case NuggetKind::homoscedastic_fixed: return "homoscedastic-fixed";
    case NuggetKind::heteroscedastic: return "heteroscedastic";
  }
  return "none";
}

NuggetKind parse_nugget_kind(const std::string& name) {
  if (name == "none") return NuggetKind::none;
  if (name == "homoscedastic-estimated") return NuggetKind::homoscedastic_estimated;
  if (name == "homoscedastic-fixed") return NuggetKind::homoscedastic_fixed;
  if (name == "heteroscedastic") return NuggetKind::heteroscedastic;
  throw ConfigError("unknown nugget kind '" + name + "'");
}

Vector NuggetSpec::diagonal(Eigen::Index n) const {
  switch (kind) {
    case NuggetKind::none: return Vector::Zero(n);
    case NuggetKind::homoscedastic_estimated:
    case NuggetKind::homoscedastic_fixed:
      if (variance < 0.0) throw ConfigError("nugget variance must be >= 0");
      return Vector::Constant(n, variance);
    case NuggetKind::heteroscedastic:
      if (variances.size() != n)
        throw DataError("heteroscedastic nugget has " + std::to_string(variances.size()) +
                        " variances for " + std::to_string(n) + " points");
      if ((variances.array() < 0.0).any()) throw DataError("nugget variances must be >= 0");
      return variances;
  }
  return Vector::Zero(n);
}

LikelihoodResult negative_log_likelihood(const Matrix& x, const Vector& y, const HyperParams& params,
                                         const NuggetSpec& nugget, bool with_gradient) {
  const auto n = x.rows();
  if (y.size() != n) throw DataError("likelihood: X and Y row counts differ");
  check_lengthscales(params.lengthscales, x.cols());
  const bool profiled = profiles_variance(nugget.kind);
  const double ratio = nugget.kind == NuggetKind::homoscedastic_estimated ? params.nugget_ratio : 0.0;
  if (ratio < 0.0) throw ConfigError("nugget ratio must be >= 0");
  if (!profiled && !(params.process_variance > 0.0)) throw ConfigError("process variance must be > 0");

  const Matrix r = correlation_matrix(x, x, params.lengthscales);
  Matrix c;
  double scale = 1.0;
  if (profiled) {
    c = r;
    c.diagonal().array() += ratio;
  } else {
    scale = params.process_variance;
    c = scale * r;
    c.diagonal() += nugget.diagonal(n);
  }
  auto [llt, jitter] = factorize_with_jitter(c, scale);

  const Vector ones = Vector::Ones(n);
  const Vector cinv_one = llt.solve(ones);
  const double one_cinv_one = ones.dot(cinv_one);
  const double beta = cinv_one.dot(y) / one_cinv_one;
  const Vector resid = y.array() - beta;
  const Vector alpha = llt.solve(resid);
  const double quad = std::max(resid.dot(alpha), 0.0);
  const Matrix& lmat = llt.matrixLLT();
  double logdet = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) logdet += 2.0 * std::log(lmat(i, i));

  LikelihoodResult out;
  out.trend = beta;
  out.jitter = jitter;
  const double log2pi = std::log(2.0 * std::numbers::pi);
  const auto nd = static_cast<double>(n);
  if (profiled) {
    const double s2 = std::max(quad / nd, std::numeric_limits<double>::min());
    out.process_variance = s2;
    out.value = 0.5 * nd * std::log(s2) + 0.5 * logdet + 0.5 * nd * (1.0 + log2pi);
  } else {
    out.process_variance = params.process_variance;
    out.value = 0.5 * logdet + 0.5 * quad + 0.5 * nd * log2pi;
  }

  if (with_gradient) {
    const auto p = x.cols();
    // d NLL = 0.5 * sum_ij W_ij dC_ij with W = C^{-1} - w * alpha alpha^T.
    Matrix w = llt.solve(Matrix::Identity(n, n));
    const double weight = profiled ? (quad > 0.0 ? nd / quad : 0.0) : 1.0;
    w.noalias() -= weight * alpha * alpha.transpose();

    out.gradient = Vector::Zero(p + (nugget.kind == NuggetKind::none ? 0 : 1));
    const Vector inv = (kSqrt5 / params.lengthscales.array()).matrix();
    Vector acc = Vector::Zero(p);
    double acc_r = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      for (Eigen::Index i = j + 1; i < n; ++i) {
        const double wr = 2.0 * w(i, j) * r(i, j);  // symmetric pair counted twice
        if (wr == 0.0) continue;
        acc_r += wr;
        for (Eigen::Index k = 0; k < p; ++k) {
          const double s = std::abs(x(i, k) - x(j, k)) * inv(k);
          acc(k) += wr * s * s * (1.0 + s) / (3.0 + 3.0 * s + s * s);
        }
      }
    }
    acc_r += w.diagonal().sum();  // R_ii = 1
    const double dscale = profiled ? 1.0 : scale;
    out.gradient.head(p) = 0.5 * dscale * acc;
    if (nugget.kind == NuggetKind::homoscedastic_estimated) {
      out.gradient(p) = 0.5 * ratio * w.trace();
    } else if (!profiled) {
      out.gradient(p) = 0.5 * scale * acc_r;
    }
  }
  return out;
}

GpModel::GpModel(IndexList active_inputs, Matrix x, Vector y, double trend, KernelParams kernel,
                 NuggetSpec nugget, double nll)
    : active_(std::move(active_inputs)),
      x_(std::move(x)),
      y_(std::move(y)),
      trend_(trend),
      kernel_(std::move(kernel)),
      nugget_(std::move(nugget)),
      nll_(nll) {
  if (x_.rows() != y_.size()) throw DataError("GpModel: X and Y row counts differ");
  if (static_cast<Eigen::Index>(active_.size()) != x_.cols())
    throw DataError("GpModel: active input list does not match X columns");
  check_lengthscales(kernel_.lengthscales, x_.cols());
  if (!(kernel_.process_variance > 0.0)) throw ConfigError("GpModel: process variance must be > 0");
  factorize();
}

void GpModel::factorize() {
  const auto n = x_.rows();
  Matrix c = kernel_.process_variance * correlation_matrix(x_, x_, kernel_.lengthscales);
  c.diagonal() += nugget_.diagonal(n);
  auto [llt, jitter] = factorize_with_jitter(c, kernel_.process_variance);
  chol_ = std::move(llt);
  jitter_ = jitter;
  alpha_ = chol_.solve(Vector((y_.array() - trend_).matrix()));
  whitened_one_ = chol_.matrixL().solve(Vector::Ones(n));
  one_cinv_one_ = whitened_one_.squaredNorm();
}

Matrix GpModel::cross_covariance(const Matrix& points) const {
  if (points.cols() != x_.cols())
    throw DataError("predict: points have " + std::to_string(points.cols()) + " columns, model has " +
                    std::to_string(x_.cols()) + " active inputs");
  return kernel_.process_variance * correlation_matrix(points, x_, kernel_.lengthscales);
}

PredictResult GpModel::predict(const Matrix& points) const {
  PredictResult out;
  const auto m = points.rows();
  out.mean.resize(m);
  out.variance.resize(m);
  const double s2 = kernel_.process_variance;
  for (Eigen::Index start = 0; start < m; start += kPredictChunk) {
    const auto len = std::min(kPredictChunk, m - start);
    const Matrix cross = cross_covariance(points.middleRows(start, len));
    out.mean.segment(start, len) = (cross * alpha_).array() + trend_;
    const Matrix v = chol_.matrixL().solve(cross.transpose());
    for (Eigen::Index i = 0; i < len; ++i) {
      const double u = 1.0 - whitened_one_.dot(v.col(i));
      double var = s2 - v.col(i).squaredNorm() + u * u / one_cinv_one_;
      if (var < 0.0) {
        out.max_clamp = std::max(out.max_clamp, -var);
        var = 0.0;
      }
      out.variance(start + i) = var;
    }
  }
  return out;
}

Vector GpModel::predict_mean(const Matrix& points) const {
  const auto m = points.rows();
  Vector mean(m);
  for (Eigen::Index start = 0; start < m; start += kPredictChunk) {
    const auto len = std::min(kPredictChunk, m - start);
    mean.segment(start, len) = (cross_covariance(points.middleRows(start, len)) * alpha_).array() + trend_;
  }
  return mean;
}

Vector GpModel::predict_mean_full(const Matrix& full_points) const {
  for (int k : active_)
    if (k < 0 || k >= full_points.cols()) throw DataError("predict: active input index out of range");
  return predict_mean(select_columns(full_points, active_));
}

LooResult GpModel::leave_one_out() const {
  const auto n = x_.rows();
  const Matrix cinv = chol_.solve(Matrix::Identity(n, n));
  const Vector cinv_one = cinv.rowwise().sum();
  const Vector qy = cinv * y_ - cinv_one * (cinv_one.dot(y_) / one_cinv_one_);
  LooResult out;
  out.mean.resize(n);
  out.variance.resize(n);
  out.noise = nugget_.diagonal(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double qii = cinv(i, i) - cinv_one(i) * cinv_one(i) / one_cinv_one_;
    out.mean(i) = y_(i) - qy(i) / qii;
    out.variance(i) = std::max(1.0 / qii - out.noise(i), 0.0);
  }
  return out;
}

Matrix GpModel::conditional_covariance(const Matrix& points) const {
  const Matrix cross = cross_covariance(points);
  const Matrix v = chol_.matrixL().solve(cross.transpose());
  const Vector u = Vector::Ones(points.rows()) - v.transpose() * whitened_one_;
  Matrix cov = kernel_.process_variance * correlation_matrix(points, points, kernel_.lengthscales);
  cov.noalias() -= v.transpose() * v;
  cov.noalias() += u * u.transpose() / one_cinv_one_;
  return cov;
}

nlohmann::json GpModel::to_json() const {
  nlohmann::json doc;
  doc["format"] = "uqpipe-gp";
  doc["version"] = 1;
  doc["active_inputs"] = active_;
  doc["trend"] = trend_;
  doc["kernel"] = {{"family", "matern"},
                   {"smoothness", 2.5},
                   {"lengthscales", std::vector<double>(kernel_.lengthscales.data(),
                                                        kernel_.lengthscales.data() + kernel_.lengthscales.size())},
                   {"process_variance", kernel_.process_variance}};
  nlohmann::json nug = {{"kind", nugget_kind_name(nugget_.kind)}, {"variance", nugget_.variance}};
  if (nugget_.kind == NuggetKind::heteroscedastic)
    nug["variances"] = std::vector<double>(nugget_.variances.data(),
                                           nugget_.variances.data() + nugget_.variances.size());
  doc["nugget"] = nug;
  doc["nll"] = nll_;
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < x_.rows(); ++i) {
    std::vector<double> row(static_cast<std::size_t>(x_.cols()));
    for (Eigen::Index k = 0; k < x_.cols(); ++k) row[static_cast<std::size_t>(k)] = x_(i, k);
    rows.push_back(row);
  }
  doc["x"] = rows;
  doc["y"] = std::vector<double>(y_.data(), y_.data() + y_.size());
  return doc;
}

GpModel GpModel::from_json(const nlohmann::json& doc) {
  try {
    if (doc.at("format").get<std::string>() != "uqpipe-gp") throw DataError("not a uqpipe GP document");
    auto active = doc.at("active_inputs").get<IndexList>();
    const auto& kern = doc.at("kernel");
    auto ls = kern.at("lengthscales").get<std::vector<double>>();
    KernelParams kernel{Eigen::Map<Vector>(ls.data(), static_cast<Eigen::Index>(ls.size())),
                        kern.at("process_variance").get<double>()};
    const auto& nug = doc.at("nugget");
    NuggetSpec nugget;
    nugget.kind = parse_nugget_kind(nug.at("kind").get<std::string>());
    nugget.variance = nug.at("variance").get<double>();
    if (nug.contains("variances")) {
      auto v = nug.at("variances").get<std::vector<double>>();
      nugget.variances = Eigen::Map<Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
    }
    auto yv = doc.at("y").get<std::vector<double>>();
    const auto& rows = doc.at("x");
    Matrix x(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(active.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      auto row = rows[i].get<std::vector<double>>();
      if (row.size() != active.size()) throw DataError("GP document: row width mismatch");
      for (std::size_t k = 0; k < row.size(); ++k)
        x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = row[k];
    }
    return GpModel(std::move(active), std::move(x),
                   Eigen::Map<Vector>(yv.data(), static_cast<Eigen::Index>(yv.size())),
                   doc.at("trend").get<double>(), std::move(kernel), std::move(nugget),
                   doc.value("nll", 0.0));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed GP document: ") + e.what());
  }
}

double default_lengthscale(double range) { return 0.5 * range; }

GpModel fit_gp(const Matrix& x, const Vector& y, const IndexList& active_inputs,
               const NuggetSpec& nugget, const FitOptions& options, std::uint64_t seed) {
  const auto n = x.rows();
  const auto p = x.cols();
  if (y.size() != n) throw DataError("fit_gp: X and Y row counts differ");
  if (n < 2) throw DataError("fit_gp: at least 2 training points are required");
  if (p < 1 || static_cast<Eigen::Index>(active_inputs.size()) != p)
    throw DataError("fit_gp: active input list does not match X columns");
  if (!y.allFinite() || !x.allFinite()) throw DataError("fit_gp: non-finite training data");
  if (!(options.lengthscale_lower > 0.0 && options.lengthscale_lower < options.lengthscale_upper))
    throw ConfigError("fit_gp: invalid lengthscale bounds");
  if (options.restarts < 1) throw ConfigError("fit_gp: restarts must be >= 1");

  const Vector range = column_ranges(x);
  if ((range.array() <= 0.0).any()) throw DataError("fit_gp: an active input column is constant");
  const double var_y = sample_variance(y);
  const bool profiled = profiles_variance(nugget.kind);
  const bool has_extra = nugget.kind != NuggetKind::none;
  const Eigen::Index dim = p + (has_extra ? 1 : 0);

  if (!(var_y > 1e-14 * (1.0 + y.squaredNorm() / static_cast<double>(n)))) {
    // Constant output: the trend explains everything.
    KernelParams kernel{range.unaryExpr([](double r) { return default_lengthscale(r); }),
                        1e-12 * std::max(1.0, y.mean() * y.mean())};
    NuggetSpec nug = nugget;
    if (nug.kind == NuggetKind::homoscedastic_estimated) nug.variance = 0.0;
    return GpModel(active_inputs, x, y, y.mean(), std::move(kernel), std::move(nug), 0.0);
  }

  Vector lower(dim), upper(dim);
  for (Eigen::Index k = 0; k < p; ++k) {
    lower(k) = std::log(options.lengthscale_lower * range(k));
    upper(k) = std::log(options.lengthscale_upper * range(k));
  }
  if (has_extra) {
    if (profiled) {
      lower(p) = std::log(options.nugget_ratio_lower);
      upper(p) = std::log(options.nugget_ratio_upper);
    } else {
      lower(p) = std::log(1e-6 * var_y);
      upper(p) = std::log(1e3 * var_y);
    }
  }

  auto unpack = [&](const Vector& z) {
    HyperParams hp;
    hp.lengthscales = z.head(p).array().exp();
    if (has_extra) {
      if (profiled) hp.nugget_ratio = std::exp(z(p));
      else hp.process_variance = std::exp(z(p));
    }
    return hp;
  };

  std::vector<Vector> starts;
  if (options.init_lengthscales) {
    if (options.init_lengthscales->size() != p) throw ConfigError("fit_gp: warm start has wrong dimension");
    Vector z(dim);
    z.head(p) = options.init_lengthscales->array().log();
    if (has_extra) z(p) = profiled ? std::log(options.init_nugget_ratio.value_or(1e-3)) : std::log(var_y);
    starts.push_back(z.cwiseMax(lower).cwiseMin(upper));
  }
  {
    Vector z(dim);
    for (Eigen::Index k = 0; k < p; ++k) z(k) = std::log(default_lengthscale(range(k)));
    if (has_extra) z(p) = profiled ? std::log(1e-3) : std::log(var_y);
    starts.push_back(z.cwiseMax(lower).cwiseMin(upper));
  }
  Rng rng(seed);
  for (int s = 1; s < options.restarts; ++s) {
    Vector z(dim);
    for (Eigen::Index k = 0; k < p; ++k)
      z(k) = std::log(range(k)) + std::log(0.05) + open_uniform(rng) * std::log(40.0);
    if (has_extra)
      z(p) = profiled ? std::log(1e-6) + open_uniform(rng) * std::log(1e5)
                      : std::log(var_y) + (open_uniform(rng) - 0.5) * std::log(100.0);
    starts.push_back(z.cwiseMax(lower).cwiseMin(upper));
  }

  Objective objective = [&](const Vector& z, Vector* grad) {
    LikelihoodResult r = negative_log_likelihood(x, y, unpack(z), nugget, grad != nullptr);
    if (grad) *grad = r.gradient;
    return r.value;
  };
  BoxOptions box;
  box.max_iterations = options.max_iterations;

  std::vector<std::optional<BoxResult>> results(starts.size());
  parallel_for(starts.size(), options.threads, [&](std::size_t i) {
    try {
      results[i] = minimize_box(objective, starts[i], lower, upper, box);
    } catch (const NumericalError&) {
      results[i].reset();
    }
  });

  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < results.size(); ++i)
    if (results[i] && (!best || results[i]->value < results[*best]->value)) best = i;
  if (!best) throw NumericalError("fit_gp: every optimization start failed to factorize");

  const HyperParams hp = unpack(results[*best]->x);
  const LikelihoodResult lr = negative_log_likelihood(x, y, hp, nugget, false);
  NuggetSpec fitted = nugget;
  if (nugget.kind == NuggetKind::homoscedastic_estimated) fitted.variance = hp.nugget_ratio * lr.process_variance;
  KernelParams kernel{hp.lengthscales, lr.process_variance};
  return GpModel(active_inputs, x, y, lr.trend, std::move(kernel), std::move(fitted), lr.value);
}

GpModel fit_gp(const LearningSample& sample, const IndexList& active_inputs, const NuggetSpec& nugget,
               const FitOptions& options, std::uint64_t seed) {
  for (int k : active_inputs)
    if (k < 0 || k >= sample.dimension()) throw ConfigError("fit_gp: active input index out of range");
  return fit_gp(select_columns(sample.x, active_inputs), sample.y, active_inputs, nugget, options, seed);
}

Matrix conditional_simulate(const GpModel& gp, const Matrix& points, int n_traj, std::uint64_t seed,
                            const std::optional<Vector>& extra_diag, int max_points) {
  const auto m = points.rows();
  if (m > max_points)
    throw ConfigError("conditional_simulate: " + std::to_string(m) + " points exceed the cap of " +
                      std::to_string(max_points));
  if (n_traj < 1) throw ConfigError("conditional_simulate: n_traj must be >= 1");
  if (extra_diag && extra_diag->size() != m)
    throw DataError("conditional_simulate: extra diagonal length does not match the point count");

  const Vector mean = gp.predict_mean(points);
  Matrix cov = gp.conditional_covariance(points);
  if (extra_diag) cov.diagonal() += *extra_diag;

  // LDL^T with pivoting tolerates the exactly-singular rows at training points.
  Eigen::LDLT<Matrix> ldlt(cov);
  // info() also flags exact zero pivots, which are expected here; check D instead.
  Vector d = ldlt.vectorD();
  if (!d.allFinite()) throw NumericalError("conditional covariance factorization failed");
  const double tol = 1e-6 * gp.kernel().process_variance;
  if (d.minCoeff() < -tol) throw NumericalError("conditional covariance is not positive semi-definite");
  d = d.cwiseMax(0.0).cwiseSqrt();
  Matrix factor = Matrix(ldlt.matrixL()) * d.asDiagonal();
  factor = ldlt.transpositionsP().transpose() * factor;

  Matrix z(m, n_traj);
  for (int t = 0; t < n_traj; ++t) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(t)));
    for (Eigen::Index i = 0; i < m; ++i) z(i, t) = standard_normal(rng);
  }
  Matrix draws = factor * z;
  draws.colwise() += mean;
  return draws.transpose();
}

}  // namespace uqpipe

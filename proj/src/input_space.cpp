#include "uqpipe/input_space.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <set>

#include "uqpipe/errors.hpp"
#include "uqpipe/rng.hpp"

namespace uqpipe {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Lower-tail rational approximation of the normal quantile, |rel err| < 1.2e-9.
double quantile_lower_tail(double p) {
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double q = p - 0.5;
  const double r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

}  // namespace

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw DataError("normal_quantile: p must lie in (0,1)");
  // Work in the lower tail so that Phi(x) - p keeps full relative precision.
  const bool upper = p > 0.5;
  const double q = upper ? 1.0 - p : p;
  double x = quantile_lower_tail(q);
  const double density = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  if (density > 0.0) x -= (normal_cdf(x) - q) / density;
  return upper ? -x : x;
}

Family parse_family(const std::string& name) {
  if (name == "uniform") return Family::uniform;
  if (name == "log-uniform" || name == "log_uniform" || name == "loguniform") return Family::log_uniform;
  if (name == "normal") return Family::normal;
  if (name == "log-normal" || name == "log_normal" || name == "lognormal") return Family::log_normal;
  throw ConfigError("unknown distribution family '" + name + "'");
}

std::string family_name(Family family) {
  switch (family) {
    case Family::uniform: return "uniform";
    case Family::log_uniform: return "log-uniform";
    case Family::normal: return "normal";
    case Family::log_normal: return "log-normal";
  }
  throw ConfigError("unknown distribution family");
}

Marginal::Marginal(std::string name, Family family, double a, double b,
                   std::optional<std::pair<double, double>> truncation)
    : name_(std::move(name)), family_(family), a_(a), b_(b), truncation_(truncation) {
  if (name_.empty()) throw ConfigError("marginal name must not be empty");
  if (!std::isfinite(a_) || !std::isfinite(b_))
    throw ConfigError("marginal '" + name_ + "': parameters must be finite");
  switch (family_) {
    case Family::uniform:
      if (!(a_ < b_)) throw ConfigError("marginal '" + name_ + "': uniform requires a < b");
      break;
    case Family::log_uniform:
      if (!(a_ < b_)) throw ConfigError("marginal '" + name_ + "': log-uniform requires a < b");
      if (!(a_ > 0.0)) throw ConfigError("marginal '" + name_ + "': log-uniform requires a > 0");
      break;
    case Family::normal:
    case Family::log_normal:
      if (!(b_ > 0.0)) throw ConfigError("marginal '" + name_ + "': standard deviation must be > 0");
      break;
  }
  if (truncation_) {
    auto [lo, hi] = *truncation_;
    if (!(lo < hi)) throw ConfigError("marginal '" + name_ + "': truncation requires lo < hi");
    if ((family_ == Family::log_normal || family_ == Family::log_uniform) && !(hi > 0.0))
      throw ConfigError("marginal '" + name_ + "': truncation outside the positive support");
    cdf_lo_ = raw_cdf(lo);
    cdf_hi_ = raw_cdf(hi);
    if (!(cdf_hi_ > cdf_lo_))
      throw ConfigError("marginal '" + name_ + "': truncation interval has zero probability");
  }
}

Marginal Marginal::uniform(std::string name, double lo, double hi) {
  return {std::move(name), Family::uniform, lo, hi};
}
Marginal Marginal::log_uniform(std::string name, double lo, double hi) {
  return {std::move(name), Family::log_uniform, lo, hi};
}
Marginal Marginal::normal(std::string name, double mean, double sd) {
  return {std::move(name), Family::normal, mean, sd};
}
Marginal Marginal::log_normal(std::string name, double mu, double sigma) {
  return {std::move(name), Family::log_normal, mu, sigma};
}

std::pair<double, double> Marginal::support() const {
  std::pair<double, double> s;
  switch (family_) {
    case Family::uniform:
    case Family::log_uniform: s = {a_, b_}; break;
    case Family::normal: s = {-kInf, kInf}; break;
    case Family::log_normal: s = {0.0, kInf}; break;
  }
  if (truncation_) {
    s.first = std::max(s.first, truncation_->first);
    s.second = std::min(s.second, truncation_->second);
  }
  return s;
}

double Marginal::raw_cdf(double x) const {
  switch (family_) {
    case Family::uniform:
      return std::clamp((x - a_) / (b_ - a_), 0.0, 1.0);
    case Family::log_uniform:
      if (x <= a_) return 0.0;
      if (x >= b_) return 1.0;
      return std::log(x / a_) / std::log(b_ / a_);
    case Family::normal:
      return normal_cdf((x - a_) / b_);
    case Family::log_normal:
      if (x <= 0.0) return 0.0;
      return normal_cdf((std::log(x) - a_) / b_);
  }
  return 0.0;
}

double Marginal::raw_quantile(double u) const {
  switch (family_) {
    case Family::uniform:
      return a_ + u * (b_ - a_);
    case Family::log_uniform:
      return std::exp(std::log(a_) + u * (std::log(b_) - std::log(a_)));
    case Family::normal:
      return a_ + b_ * normal_quantile(u);
    case Family::log_normal:
      return std::exp(a_ + b_ * normal_quantile(u));
  }
  return 0.0;
}

double Marginal::cdf(double x) const {
  const double raw = raw_cdf(x);
  if (!truncation_) return raw;
  return std::clamp((raw - cdf_lo_) / (cdf_hi_ - cdf_lo_), 0.0, 1.0);
}

double Marginal::quantile(double u) const {
  if (!(u > 0.0 && u < 1.0))
    throw DataError("marginal '" + name_ + "': unit coordinate " + std::to_string(u) +
                    " outside (0,1)");
  if (!truncation_) return raw_quantile(u);
  const double x = raw_quantile(cdf_lo_ + u * (cdf_hi_ - cdf_lo_));
  return std::clamp(x, truncation_->first, truncation_->second);
}

InputSpace::InputSpace(std::vector<Marginal> marginals) : marginals_(std::move(marginals)) {
  if (marginals_.empty()) throw ConfigError("input space needs at least one marginal");
  std::set<std::string> seen;
  for (const auto& m : marginals_)
    if (!seen.insert(m.name()).second) throw ConfigError("duplicate input name '" + m.name() + "'");
}

std::vector<std::string> InputSpace::names() const {
  std::vector<std::string> out;
  out.reserve(marginals_.size());
  for (const auto& m : marginals_) out.push_back(m.name());
  return out;
}

InputSpace InputSpace::subset(const IndexList& indices) const {
  std::vector<Marginal> out;
  out.reserve(indices.size());
  for (int k : indices) {
    if (k < 0 || k >= dimension()) throw ConfigError("input index out of range");
    out.push_back(marginals_[static_cast<std::size_t>(k)]);
  }
  return InputSpace(std::move(out));
}

Vector InputSpace::transform(const Vector& u) const {
  if (u.size() != dimension())
    throw DataError("transform: point has dimension " + std::to_string(u.size()) + ", expected " +
                    std::to_string(dimension()));
  Vector x(u.size());
  for (int k = 0; k < dimension(); ++k) x(k) = marginals_[static_cast<std::size_t>(k)].quantile(u(k));
  return x;
}

Matrix InputSpace::transform(const Matrix& u) const {
  if (u.cols() != dimension())
    throw DataError("transform: design has " + std::to_string(u.cols()) + " columns, expected " +
                    std::to_string(dimension()));
  Matrix x(u.rows(), u.cols());
  for (int k = 0; k < dimension(); ++k) {
    const auto& m = marginals_[static_cast<std::size_t>(k)];
    for (Eigen::Index i = 0; i < u.rows(); ++i) x(i, k) = m.quantile(u(i, k));
  }
  return x;
}

Matrix InputSpace::sample(int n, std::uint64_t seed) const {
  if (n < 1) throw ConfigError("sample: n must be >= 1");
  Rng rng(seed);
  Matrix u(n, dimension());
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < dimension(); ++k) u(i, k) = open_uniform(rng);
  return transform(u);
}

}  // namespace uqpipe

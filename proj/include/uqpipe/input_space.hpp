#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "uqpipe/types.hpp"

namespace uqpipe {

/// Standard normal CDF.
double normal_cdf(double x);

/// Standard normal quantile: rational approximation refined by a Newton step.
/// Requires p in (0, 1).
double normal_quantile(double p);

enum class Family { uniform, log_uniform, normal, log_normal };

Family parse_family(const std::string& name);
std::string family_name(Family family);

/// One independent input distribution.
///
/// For uniform / log-uniform, `a < b` are the physical bounds. For normal /
/// log-normal, `a` is the mean and `b` the standard deviation of the
/// (underlying) normal variable. The optional truncation bounds are always
/// expressed in physical units.
class Marginal {
 public:
  Marginal(std::string name, Family family, double a, double b,
           std::optional<std::pair<double, double>> truncation = std::nullopt);

  static Marginal uniform(std::string name, double lo, double hi);
  static Marginal log_uniform(std::string name, double lo, double hi);
  static Marginal normal(std::string name, double mean, double sd);
  static Marginal log_normal(std::string name, double mu, double sigma);

  const std::string& name() const { return name_; }
  Family family() const { return family_; }
  double a() const { return a_; }
  double b() const { return b_; }
  const std::optional<std::pair<double, double>>& truncation() const { return truncation_; }

  /// Physical support [lo, hi] (may be infinite).
  std::pair<double, double> support() const;

  double cdf(double x) const;
  /// Inverse CDF; throws DataError unless u is strictly inside (0, 1).
  double quantile(double u) const;

 private:
  double raw_cdf(double x) const;
  double raw_quantile(double u) const;

  std::string name_;
  Family family_;
  double a_;
  double b_;
  std::optional<std::pair<double, double>> truncation_;
  double cdf_lo_ = 0.0;
  double cdf_hi_ = 1.0;
};

/// Ordered list of independent marginals.
class InputSpace {
 public:
  explicit InputSpace(std::vector<Marginal> marginals);

  int dimension() const { return static_cast<int>(marginals_.size()); }
  const std::vector<Marginal>& marginals() const { return marginals_; }
  const Marginal& operator[](int k) const { return marginals_[static_cast<std::size_t>(k)]; }
  std::vector<std::string> names() const;

  /// Sub-space with the marginals at `indices`, in that order.
  InputSpace subset(const IndexList& indices) const;

  /// Maps one unit-hypercube point to physical space.
  Vector transform(const Vector& u) const;
  /// Row-wise transform of an n x d matrix of unit points.
  Matrix transform(const Matrix& u) const;

  /// n i.i.d. draws from the product distribution.
  Matrix sample(int n, std::uint64_t seed) const;

 private:
  std::vector<Marginal> marginals_;
};

}  // namespace uqpipe

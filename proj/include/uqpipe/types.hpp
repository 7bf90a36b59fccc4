#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

namespace uqpipe {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using IndexList = std::vector<int>;

/// Paired design matrix (one row per simulation) and scalar outputs.
struct LearningSample {
  std::vector<std::string> names;
  Matrix x;
  Vector y;

  int size() const { return static_cast<int>(y.size()); }
  int dimension() const { return static_cast<int>(x.cols()); }
};

/// Returns the columns `cols` of `x`, in that order.
inline Matrix select_columns(const Matrix& x, const IndexList& cols) {
  Matrix out(x.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = x.col(cols[j]);
  return out;
}

/// Unbiased sample variance.
inline double sample_variance(const Vector& v) {
  if (v.size() < 2) return 0.0;
  const double mean = v.mean();
  return (v.array() - mean).square().sum() / static_cast<double>(v.size() - 1);
}

}  // namespace uqpipe

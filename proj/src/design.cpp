#include "uqpipe/design.hpp"

#include <cmath>
#include <numeric>
#include <vector>

#include "uqpipe/errors.hpp"
#include "uqpipe/rng.hpp"

namespace uqpipe {

void DesignMatrix::attach_physical(const InputSpace& space) {
  physical_points = space.transform(unit_points);
}

DesignMatrix lhs(int n, int d, std::uint64_t seed) {
  if (n < 2) throw ConfigError("lhs: n must be >= 2");
  if (d < 1) throw ConfigError("lhs: d must be >= 1");
  Rng rng(seed);
  DesignMatrix design;
  design.unit_points.resize(n, d);
  std::vector<int> strata(static_cast<std::size_t>(n));
  for (int k = 0; k < d; ++k) {
    std::iota(strata.begin(), strata.end(), 0);
    shuffle(strata.begin(), strata.end(), rng);
    for (int i = 0; i < n; ++i)
      design.unit_points(i, k) = (strata[static_cast<std::size_t>(i)] + open_uniform(rng)) / n;
  }
  return design;
}

bool has_lhs_property(const Matrix& unit_points) {
  const auto n = unit_points.rows();
  for (Eigen::Index k = 0; k < unit_points.cols(); ++k) {
    std::vector<int> hits(static_cast<std::size_t>(n), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double v = unit_points(i, k);
      if (!(v >= 0.0 && v <= 1.0)) return false;
      auto s = static_cast<Eigen::Index>(std::floor(v * static_cast<double>(n)));
      if (s == n) s = n - 1;
      if (++hits[static_cast<std::size_t>(s)] > 1) return false;
    }
  }
  return true;
}

namespace {

inline double single_factor(double x) {
  const double a = std::abs(x - 0.5);
  return 1.0 + 0.5 * a - 0.5 * a * a;
}

inline double pair_factor(double x, double y) {
  return 1.0 + 0.5 * std::abs(x - 0.5) + 0.5 * std::abs(y - 0.5) - 0.5 * std::abs(x - y);
}

// Holds the per-point and pairwise products so that a within-column swap can
// be scored in O(n).
class DiscrepancyState {
 public:
  explicit DiscrepancyState(const Matrix& x) : x_(x), n_(x.rows()), d_(x.cols()) {
    single_ = Vector::Ones(n_);
    pair_ = Matrix::Ones(n_, n_);
    for (Eigen::Index i = 0; i < n_; ++i)
      for (Eigen::Index k = 0; k < d_; ++k) single_(i) *= single_factor(x_(i, k));
    for (Eigen::Index i = 0; i < n_; ++i)
      for (Eigen::Index j = i; j < n_; ++j) {
        double p = 1.0;
        for (Eigen::Index k = 0; k < d_; ++k) p *= pair_factor(x_(i, k), x_(j, k));
        pair_(i, j) = pair_(j, i) = p;
      }
    value_ = std::pow(13.0 / 12.0, static_cast<double>(d_)) -
             2.0 / static_cast<double>(n_) * single_.sum() +
             pair_.sum() / static_cast<double>(n_ * n_);
  }

  double value() const { return value_; }
  const Matrix& points() const { return x_; }

  // Change in discrepancy if x(i,k) and x(j,k) were exchanged.
  double swap_delta(Eigen::Index i, Eigen::Index j, Eigen::Index k) const {
    const double xi = x_(i, k), xj = x_(j, k);
    const double n = static_cast<double>(n_);
    const double gi = single_(i) * single_factor(xj) / single_factor(xi);
    const double gj = single_(j) * single_factor(xi) / single_factor(xj);
    double cross = 0.0;
    for (Eigen::Index l = 0; l < n_; ++l) {
      if (l == i || l == j) continue;
      const double xl = x_(l, k);
      cross += pair_(i, l) * (pair_factor(xj, xl) / pair_factor(xi, xl) - 1.0) +
               pair_(j, l) * (pair_factor(xi, xl) / pair_factor(xj, xl) - 1.0);
    }
    const double dii = pair_(i, i) * (pair_factor(xj, xj) / pair_factor(xi, xi) - 1.0);
    const double djj = pair_(j, j) * (pair_factor(xi, xi) / pair_factor(xj, xj) - 1.0);
    return -2.0 / n * (gi - single_(i) + gj - single_(j)) + (2.0 * cross + dii + djj) / (n * n);
  }

  void apply_swap(Eigen::Index i, Eigen::Index j, Eigen::Index k, double delta) {
    const double xi = x_(i, k), xj = x_(j, k);
    single_(i) *= single_factor(xj) / single_factor(xi);
    single_(j) *= single_factor(xi) / single_factor(xj);
    for (Eigen::Index l = 0; l < n_; ++l) {
      if (l == i || l == j) continue;
      const double xl = x_(l, k);
      pair_(i, l) *= pair_factor(xj, xl) / pair_factor(xi, xl);
      pair_(l, i) = pair_(i, l);
      pair_(j, l) *= pair_factor(xi, xl) / pair_factor(xj, xl);
      pair_(l, j) = pair_(j, l);
    }
    pair_(i, i) *= pair_factor(xj, xj) / pair_factor(xi, xi);
    pair_(j, j) *= pair_factor(xi, xi) / pair_factor(xj, xj);
    std::swap(x_(i, k), x_(j, k));
    value_ += delta;
  }

 private:
  Matrix x_;
  Eigen::Index n_, d_;
  Vector single_;
  Matrix pair_;
  double value_ = 0.0;
};

}  // namespace

double centered_l2_discrepancy(const Matrix& unit_points) {
  if (unit_points.rows() < 1 || unit_points.cols() < 1) throw DataError("empty design");
  return DiscrepancyState(unit_points).value();
}

DesignMatrix optimize_lhs(const DesignMatrix& design, const AnnealingOptions& options,
                          std::uint64_t seed) {
  if (options.iterations <= 0 || design.size() < 2) return design;
  DiscrepancyState state(design.unit_points);
  const double start_value = state.value();
  Matrix best = state.points();
  double best_value = start_value;

  Rng rng(seed);
  const auto n = static_cast<std::uint64_t>(design.size());
  const auto d = static_cast<std::uint64_t>(design.dimension());
  double temperature = options.initial_temperature * start_value;
  const double cooling =
      std::pow(options.final_temperature_ratio, 1.0 / static_cast<double>(options.iterations));

  for (int it = 0; it < options.iterations; ++it, temperature *= cooling) {
    const auto k = static_cast<Eigen::Index>(uniform_index(rng, d));
    const auto i = static_cast<Eigen::Index>(uniform_index(rng, n));
    auto j = static_cast<Eigen::Index>(uniform_index(rng, n - 1));
    if (j >= i) ++j;
    const double delta = state.swap_delta(i, j, k);
    const double u = open_uniform(rng);
    if (delta < 0.0 || (temperature > 0.0 && u < std::exp(-delta / temperature))) {
      state.apply_swap(i, j, k, delta);
      if (state.value() < best_value) {
        best_value = state.value();
        best = state.points();
      }
    }
  }

  DesignMatrix out;
  // The running value accumulates rounding; confirm against a fresh evaluation.
  if (centered_l2_discrepancy(best) <= centered_l2_discrepancy(design.unit_points)) {
    out.unit_points = std::move(best);
  } else {
    out.unit_points = design.unit_points;
  }
  return out;
}

DesignMatrix optimize_lhs(const DesignMatrix& design, int iterations, std::uint64_t seed) {
  AnnealingOptions options;
  options.iterations = iterations;
  return optimize_lhs(design, options, seed);
}

}  // namespace uqpipe

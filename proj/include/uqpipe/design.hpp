#pragma once

#include <cstdint>

#include "uqpipe/input_space.hpp"
#include "uqpipe/types.hpp"

namespace uqpipe {

/// A design in the unit hypercube together with its physical image.
struct DesignMatrix {
  Matrix unit_points;      // n x d, in (0,1)^d
  Matrix physical_points;  // n x d, empty until attach_physical() is called

  int size() const { return static_cast<int>(unit_points.rows()); }
  int dimension() const { return static_cast<int>(unit_points.cols()); }

  /// Fills physical_points = space.transform(unit_points).
  void attach_physical(const InputSpace& space);
};

/// Random Latin hypercube: one point per stratum [i/n, (i+1)/n) in every
/// column, uniformly jittered inside its stratum.
DesignMatrix lhs(int n, int d, std::uint64_t seed);

/// True iff every column has exactly one point per stratum.
bool has_lhs_property(const Matrix& unit_points);

/// Squared centered L2 discrepancy (Hickernell).
double centered_l2_discrepancy(const Matrix& unit_points);

struct AnnealingOptions {
  int iterations = 10000;
  /// Initial temperature as a fraction of the starting discrepancy.
  double initial_temperature = 0.01;
  /// Temperature after the last iteration, relative to the initial one.
  double final_temperature_ratio = 1e-3;
};

/// Simulated annealing over within-column swaps. Returns the best design
/// visited, so the discrepancy never increases; LHS structure is kept.
DesignMatrix optimize_lhs(const DesignMatrix& design, const AnnealingOptions& options,
                          std::uint64_t seed);

/// Convenience overload with default annealing schedule.
DesignMatrix optimize_lhs(const DesignMatrix& design, int iterations, std::uint64_t seed);

}  // namespace uqpipe

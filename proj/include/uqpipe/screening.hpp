#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "uqpipe/types.hpp"

namespace uqpipe {

/// Gaussian kernels k(a,b) = exp(-(a-b)^2 / s^2) on both samples. The
/// bandwidth s defaults to the empirical standard deviation of the sample;
/// an explicit value overrides it.
struct HsicKernelConfig {
  std::optional<double> x_bandwidth;
  std::optional<double> y_bandwidth;
};

enum class TestMethod { permutation, gamma };

TestMethod parse_test_method(const std::string& name);
std::string test_method_name(TestMethod method);

/// Centered Gram matrix H K H of the Gaussian kernel on `v`.
Matrix centered_gram(const Vector& v, std::optional<double> bandwidth);

/// Biased (V-statistic) HSIC estimator (1/n^2) tr(K H L H).
double hsic(const Vector& x, const Vector& y, const HsicKernelConfig& cfg = {});

/// HSIC(x,y) / sqrt(HSIC(x,x) HSIC(y,y)), in [0,1].
double r2_hsic(const Vector& x, const Vector& y, const HsicKernelConfig& cfg = {});

/// Permutation p-value (1 + #{b : HSIC(x_perm, y) >= HSIC(x, y)}) / (B + 1).
double permutation_test(const Vector& x, const Vector& y, const HsicKernelConfig& cfg,
                        int permutations, std::uint64_t seed, int threads = 1);

/// Asymptotic p-value from a two-moment Gamma fit of n * HSIC under independence.
double gamma_test(const Vector& x, const Vector& y, const HsicKernelConfig& cfg = {});

struct InputScreening {
  std::string name;
  int index = 0;
  double hsic = 0.0;
  double r2_hsic = 0.0;
  double p_value = 1.0;
  bool selected = false;
  int rank = 0;  // 1-based among selected inputs, 0 when not selected
};

struct ScreeningReport {
  double alpha = 0.1;
  TestMethod method = TestMethod::permutation;
  int permutations = 0;
  std::vector<InputScreening> inputs;

  /// Selected input indices, ordered by rank.
  IndexList pii() const;
  /// Indices of the inputs that were not selected, ascending.
  IndexList non_pii() const;
};

struct ScreeningOptions {
  double alpha = 0.1;
  TestMethod method = TestMethod::permutation;
  int permutations = 1000;
  int threads = 1;
};

/// Marginal independence test of every input against the output.
ScreeningReport screen(const LearningSample& sample, const ScreeningOptions& options,
                       std::uint64_t seed);

}  // namespace uqpipe

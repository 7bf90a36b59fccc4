#include "uqpipe/screening.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/special_functions/gamma.hpp>

#include "uqpipe/errors.hpp"
#include "uqpipe/parallel.hpp"
#include "uqpipe/rng.hpp"

namespace uqpipe {

namespace {

constexpr int kMinSamples = 4;
constexpr int kGammaMinSamples = 50;

void check_pair(const Vector& x, const Vector& y) {
  if (x.size() != y.size()) throw DataError("hsic: samples have different lengths");
  if (x.size() < kMinSamples) throw DataError("hsic: at least 4 observations are required");
}

double bandwidth_for(const Vector& v, std::optional<double> override) {
  if (override) {
    if (!(*override > 0.0)) throw ConfigError("hsic: bandwidth must be > 0");
    return *override;
  }
  const double sd = std::sqrt(sample_variance(v));
  if (!(sd > 0.0)) throw DataError("hsic: constant sample has no kernel bandwidth");
  return sd;
}

Matrix gram(const Vector& v, double bandwidth) {
  const auto n = v.size();
  const double scale = -1.0 / (bandwidth * bandwidth);
  Matrix k(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    k(j, j) = 1.0;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      const double d = v(i) - v(j);
      k(i, j) = k(j, i) = std::exp(scale * d * d);
    }
  }
  return k;
}

Matrix center(const Matrix& k) {
  const Vector col_means = k.colwise().mean().transpose();
  const double grand = col_means.mean();
  Matrix c = k;
  c.colwise() -= col_means;
  c.rowwise() -= col_means.transpose();
  c.array() += grand;
  return c;
}

// (1/n^2) sum_ij A(p_i, p_j) B(i, j) for a permutation p applied to A.
double permuted_inner(const Matrix& a, const Matrix& b, const std::vector<int>& perm) {
  const auto n = static_cast<Eigen::Index>(perm.size());
  double total = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    const double* acol = a.col(perm[static_cast<std::size_t>(j)]).data();
    const double* bcol = b.col(j).data();
    double s = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) s += acol[perm[static_cast<std::size_t>(i)]] * bcol[i];
    total += s;
  }
  return total / static_cast<double>(n * n);
}

double inner(const Matrix& a, const Matrix& b) {
  return (a.array() * b.array()).sum() / static_cast<double>(a.rows() * a.rows());
}

double permutation_p_value(const Matrix& kc, const Matrix& lc, int permutations,
                           std::uint64_t seed, int threads) {
  const auto n = static_cast<int>(kc.rows());
  std::vector<int> identity(static_cast<std::size_t>(n));
  std::iota(identity.begin(), identity.end(), 0);
  const double observed = permuted_inner(kc, lc, identity);
  std::vector<char> exceed(static_cast<std::size_t>(permutations), 0);
  parallel_for(static_cast<std::size_t>(permutations), threads, [&](std::size_t b) {
    Rng rng(derive_seed(seed, b));
    std::vector<int> perm = identity;
    shuffle(perm.begin(), perm.end(), rng);
    exceed[b] = permuted_inner(kc, lc, perm) >= observed ? 1 : 0;
  });
  const auto count = std::count(exceed.begin(), exceed.end(), 1);
  return (1.0 + static_cast<double>(count)) / (permutations + 1.0);
}

double gamma_p_value(const Matrix& k, const Matrix& kc, const Matrix& l, const Matrix& lc) {
  const auto n = static_cast<double>(k.rows());
  const double stat = (kc.array() * lc.array()).sum() / n;  // n * HSIC_b

  Matrix var_terms = (kc.array() * lc.array() / 6.0).square().matrix();
  double var = (var_terms.sum() - var_terms.diagonal().sum()) / (n * (n - 1.0));
  var *= 72.0 * (n - 4.0) * (n - 5.0) / (n * (n - 1.0) * (n - 2.0) * (n - 3.0));

  const double mu_x = (k.sum() - k.diagonal().sum()) / (n * (n - 1.0));
  const double mu_y = (l.sum() - l.diagonal().sum()) / (n * (n - 1.0));
  const double mean = (1.0 + mu_x * mu_y - mu_x - mu_y) / n;
  if (!(mean > 0.0) || !(var > 0.0)) return 1.0;

  const double shape = mean * mean / var;
  const double scale = var * n / mean;
  return boost::math::gamma_q(shape, stat / scale);
}

}  // namespace

TestMethod parse_test_method(const std::string& name) {
  if (name == "permutation") return TestMethod::permutation;
  if (name == "gamma") return TestMethod::gamma;
  throw ConfigError("unknown independence test '" + name + "' (expected permutation|gamma)");
}

std::string test_method_name(TestMethod method) {
  return method == TestMethod::gamma ? "gamma" : "permutation";
}

Matrix centered_gram(const Vector& v, std::optional<double> bandwidth) {
  return center(gram(v, bandwidth_for(v, bandwidth)));
}

double hsic(const Vector& x, const Vector& y, const HsicKernelConfig& cfg) {
  check_pair(x, y);
  const Matrix kc = centered_gram(x, cfg.x_bandwidth);
  const Matrix l = gram(y, bandwidth_for(y, cfg.y_bandwidth));
  return std::max(0.0, inner(kc, l));
}

double r2_hsic(const Vector& x, const Vector& y, const HsicKernelConfig& cfg) {
  check_pair(x, y);
  const Matrix kc = centered_gram(x, cfg.x_bandwidth);
  const Matrix lc = centered_gram(y, cfg.y_bandwidth);
  const double xx = inner(kc, kc);
  const double yy = inner(lc, lc);
  if (!(xx > 0.0) || !(yy > 0.0)) throw DataError("r2_hsic: zero self-dependence");
  return std::clamp(inner(kc, lc) / std::sqrt(xx * yy), 0.0, 1.0);
}

double permutation_test(const Vector& x, const Vector& y, const HsicKernelConfig& cfg,
                        int permutations, std::uint64_t seed, int threads) {
  check_pair(x, y);
  if (permutations < 100) throw ConfigError("permutation_test: at least 100 permutations required");
  return permutation_p_value(centered_gram(x, cfg.x_bandwidth), centered_gram(y, cfg.y_bandwidth),
                             permutations, seed, threads);
}

double gamma_test(const Vector& x, const Vector& y, const HsicKernelConfig& cfg) {
  check_pair(x, y);
  if (x.size() < kGammaMinSamples)
    throw DataError("gamma_test: asymptotic test needs n >= 50 (use the permutation test)");
  const Matrix k = gram(x, bandwidth_for(x, cfg.x_bandwidth));
  const Matrix l = gram(y, bandwidth_for(y, cfg.y_bandwidth));
  return gamma_p_value(k, center(k), l, center(l));
}

IndexList ScreeningReport::pii() const {
  std::vector<const InputScreening*> sel;
  for (const auto& in : inputs)
    if (in.selected) sel.push_back(&in);
  std::sort(sel.begin(), sel.end(), [](auto* a, auto* b) { return a->rank < b->rank; });
  IndexList out;
  for (auto* s : sel) out.push_back(s->index);
  return out;
}

IndexList ScreeningReport::non_pii() const {
  IndexList out;
  for (const auto& in : inputs)
    if (!in.selected) out.push_back(in.index);
  return out;
}

ScreeningReport screen(const LearningSample& sample, const ScreeningOptions& options,
                       std::uint64_t seed) {
  if (!(options.alpha > 0.0 && options.alpha < 1.0)) throw ConfigError("screen: alpha must be in (0,1)");
  if (sample.x.rows() != sample.y.size()) throw DataError("screen: X and Y row counts differ");
  if (sample.size() < kMinSamples) throw DataError("screen: at least 4 observations are required");
  if (options.method == TestMethod::permutation && options.permutations < 100)
    throw ConfigError("screen: at least 100 permutations required");
  if (options.method == TestMethod::gamma && sample.size() < kGammaMinSamples)
    throw DataError("screen: gamma test needs n >= 50 (use the permutation test)");

  const Matrix l = gram(sample.y, bandwidth_for(sample.y, std::nullopt));
  const Matrix lc = center(l);
  const double yy = inner(lc, lc);
  if (!(yy > 0.0)) throw DataError("screen: output sample is degenerate");

  ScreeningReport report;
  report.alpha = options.alpha;
  report.method = options.method;
  report.permutations = options.method == TestMethod::permutation ? options.permutations : 0;

  for (int k = 0; k < sample.dimension(); ++k) {
    InputScreening in;
    in.index = k;
    in.name = k < static_cast<int>(sample.names.size()) ? sample.names[static_cast<std::size_t>(k)]
                                                        : "X" + std::to_string(k + 1);
    const Vector xk = sample.x.col(k);
    const Matrix kk = gram(xk, bandwidth_for(xk, std::nullopt));
    const Matrix kc = center(kk);
    const double xx = inner(kc, kc);
    in.hsic = std::max(0.0, inner(kc, lc));
    in.r2_hsic = std::clamp(in.hsic / std::sqrt(xx * yy), 0.0, 1.0);
    in.p_value = options.method == TestMethod::permutation
                     ? permutation_p_value(kc, lc, options.permutations,
                                           derive_seed(seed, static_cast<std::uint64_t>(k)),
                                           options.threads)
                     : gamma_p_value(kk, kc, l, lc);
    in.selected = in.p_value < options.alpha;
    report.inputs.push_back(std::move(in));
  }

  std::vector<InputScreening*> sel;
  for (auto& in : report.inputs)
    if (in.selected) sel.push_back(&in);
  std::stable_sort(sel.begin(), sel.end(), [](auto* a, auto* b) {
    if (a->r2_hsic != b->r2_hsic) return a->r2_hsic > b->r2_hsic;
    return a->index < b->index;
  });
  for (std::size_t r = 0; r < sel.size(); ++r) sel[r]->rank = static_cast<int>(r) + 1;
  return report;
}

}  // namespace uqpipe

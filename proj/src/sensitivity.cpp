#include "uqpipe/sensitivity.hpp"

#include <algorithm>
#include <cmath>

#include "uqpipe/errors.hpp"
#include "uqpipe/rng.hpp"

namespace uqpipe {

namespace {

constexpr int kMinMonteCarlo = 10000;

void check_settings(const SobolSettings& s) {
  if (s.n < kMinMonteCarlo) throw ConfigError("Sobol' estimation needs N >= 10000");
  if (s.bootstrap < 0) throw ConfigError("bootstrap count must be >= 0");
  if (s.variance && !(*s.variance > 0.0)) throw ConfigError("Sobol' denominator must be > 0");
}

void check_index(const InputSpace& space, int k) {
  if (k < 0 || k >= space.dimension()) throw ConfigError("Sobol' index outside the input space");
}

struct PickFreeze {
  Matrix a, b;
};

PickFreeze draw(const InputSpace& space, int n, std::uint64_t seed) {
  return {space.sample(n, derive_seed(seed, "A")), space.sample(n, derive_seed(seed, "B"))};
}

Matrix freeze(const PickFreeze& pf, const IndexList& u) {
  Matrix c = pf.b;
  for (int k : u) c.col(k) = pf.a.col(k);
  return c;
}

double variance_of(const Vector& v, const std::vector<std::size_t>* idx) {
  if (!idx) return sample_variance(v);
  double mean = 0.0;
  for (auto i : *idx) mean += v(static_cast<Eigen::Index>(i));
  mean /= static_cast<double>(idx->size());
  double ss = 0.0;
  for (auto i : *idx) ss += std::pow(v(static_cast<Eigen::Index>(i)) - mean, 2);
  return ss / static_cast<double>(idx->size() - 1);
}

// V_u = mean(fA fC) - mean((fA + fC)/2)^2 over the selected rows.
double closed_variance(const Vector& fa, const Vector& fc, const std::vector<std::size_t>* idx) {
  double prod = 0.0, mean = 0.0;
  const auto n = idx ? idx->size() : static_cast<std::size_t>(fa.size());
  for (std::size_t r = 0; r < n; ++r) {
    const auto i = static_cast<Eigen::Index>(idx ? (*idx)[r] : r);
    prod += fa(i) * fc(i);
    mean += 0.5 * (fa(i) + fc(i));
  }
  prod /= static_cast<double>(n);
  mean /= static_cast<double>(n);
  return prod - mean * mean;
}

double jansen_variance(const Vector& fa, const Vector& fab, const std::vector<std::size_t>* idx) {
  double s = 0.0;
  const auto n = idx ? idx->size() : static_cast<std::size_t>(fa.size());
  for (std::size_t r = 0; r < n; ++r) {
    const auto i = static_cast<Eigen::Index>(idx ? (*idx)[r] : r);
    s += std::pow(fa(i) - fab(i), 2);
  }
  return 0.5 * s / static_cast<double>(n);
}

// Bootstrap standard error of `stat` evaluated on resampled row indices.
template <typename Stat>
double bootstrap_se(std::size_t n, int resamples, std::uint64_t seed, Stat&& stat) {
  if (resamples < 2) return 0.0;
  Rng rng(derive_seed(seed, "bootstrap"));
  std::vector<std::size_t> idx(n);
  std::vector<double> values;
  values.reserve(static_cast<std::size_t>(resamples));
  for (int b = 0; b < resamples; ++b) {
    for (auto& i : idx) i = static_cast<std::size_t>(uniform_index(rng, n));
    values.push_back(stat(&idx));
  }
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= resamples;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / (resamples - 1));
}

Vector evaluate(const BatchFunction& f, const Matrix& x) {
  Vector y = f(x);
  if (y.size() != x.rows()) throw DataError("Sobol' estimation: function returned the wrong number of values");
  return y;
}

}  // namespace

IndexEstimate sobol_first(const BatchFunction& f, const InputSpace& space, const IndexList& u,
                          const SobolSettings& settings, std::uint64_t seed) {
  check_settings(settings);
  if (u.empty()) throw ConfigError("sobol_first: empty input subset");
  for (int k : u) check_index(space, k);
  const PickFreeze pf = draw(space, settings.n, seed);
  const Vector fa = evaluate(f, pf.a);
  const Vector fc = evaluate(f, freeze(pf, u));
  auto stat = [&](const std::vector<std::size_t>* idx) {
    const double denom = settings.variance ? *settings.variance : variance_of(fa, idx);
    return closed_variance(fa, fc, idx) / denom;
  };
  return {stat(nullptr), bootstrap_se(static_cast<std::size_t>(settings.n), settings.bootstrap, seed, stat)};
}

IndexEstimate sobol_second(const BatchFunction& f, const InputSpace& space, int i, int j,
                           const SobolSettings& settings, std::uint64_t seed) {
  check_settings(settings);
  check_index(space, i);
  check_index(space, j);
  if (i == j) throw ConfigError("sobol_second: inputs must differ");
  const int lo = std::min(i, j), hi = std::max(i, j);
  const PickFreeze pf = draw(space, settings.n, seed);
  const Vector fa = evaluate(f, pf.a);
  const Vector fi = evaluate(f, freeze(pf, {lo}));
  const Vector fj = evaluate(f, freeze(pf, {hi}));
  const Vector fij = evaluate(f, freeze(pf, {lo, hi}));
  auto stat = [&](const std::vector<std::size_t>* idx) {
    const double denom = settings.variance ? *settings.variance : variance_of(fa, idx);
    return (closed_variance(fa, fij, idx) - closed_variance(fa, fi, idx) - closed_variance(fa, fj, idx)) /
           denom;
  };
  return {stat(nullptr), bootstrap_se(static_cast<std::size_t>(settings.n), settings.bootstrap, seed, stat)};
}

IndexEstimate sobol_total(const BatchFunction& f, const InputSpace& space, int k,
                          const SobolSettings& settings, std::uint64_t seed) {
  check_settings(settings);
  check_index(space, k);
  const PickFreeze pf = draw(space, settings.n, seed);
  Matrix ab = pf.a;
  ab.col(k) = pf.b.col(k);
  const Vector fa = evaluate(f, pf.a);
  const Vector fab = evaluate(f, ab);
  auto stat = [&](const std::vector<std::size_t>* idx) {
    const double denom = settings.variance ? *settings.variance : variance_of(fa, idx);
    return jansen_variance(fa, fab, idx) / denom;
  };
  return {stat(nullptr), bootstrap_se(static_cast<std::size_t>(settings.n), settings.bootstrap, seed, stat)};
}

VarianceDecomposition variance_decomposition(const JointGpModel& joint, const InputSpace& space, int n,
                                             std::uint64_t seed) {
  if (n < kMinMonteCarlo) throw ConfigError("variance_decomposition needs N >= 10000");
  const Matrix x = space.subset(joint.pii()).sample(n, seed);
  const Vector m = joint.predict_mean_only(x);
  const Vector d = joint.predict_dispersion(x);
  VarianceDecomposition out;
  out.var_mean_component = sample_variance(m);
  out.mean_dispersion_component = d.mean();
  out.var_y = out.var_mean_component + out.mean_dispersion_component;
  return out;
}

IndexEstimate total_index_eps(const JointGpModel& joint, const InputSpace& space, int n, std::uint64_t seed,
                              int bootstrap) {
  if (n < kMinMonteCarlo) throw ConfigError("total_index_eps needs N >= 10000");
  const Matrix x = space.subset(joint.pii()).sample(n, seed);
  const Vector m = joint.predict_mean_only(x);
  const Vector d = joint.predict_dispersion(x);
  auto stat = [&](const std::vector<std::size_t>* idx) {
    double md = 0.0;
    if (idx) {
      for (auto i : *idx) md += d(static_cast<Eigen::Index>(i));
      md /= static_cast<double>(idx->size());
    } else {
      md = d.mean();
    }
    return md / (variance_of(m, idx) + md);
  };
  return {stat(nullptr), bootstrap_se(static_cast<std::size_t>(n), bootstrap, seed, stat)};
}

ScreeningReport dispersion_sensitivity(const JointGpModel& joint, const LearningSample& sample,
                                       const ScreeningOptions& options, std::uint64_t seed) {
  LearningSample disp;
  disp.x = select_columns(sample.x, joint.pii());
  disp.y = joint.predict_dispersion(disp.x);
  for (int k : joint.pii())
    disp.names.push_back(k < static_cast<int>(sample.names.size()) ? sample.names[static_cast<std::size_t>(k)]
                                                                   : "X" + std::to_string(k + 1));
  ScreeningReport report;
  if (!(sample_variance(disp.y) > 0.0)) {
    // Dispersion sits on the floor everywhere: nothing can depend on it.
    report.alpha = options.alpha;
    report.method = options.method;
    report.permutations = options.method == TestMethod::permutation ? options.permutations : 0;
    for (int c = 0; c < disp.dimension(); ++c) {
      InputScreening in;
      in.index = c;
      in.name = disp.names[static_cast<std::size_t>(c)];
      report.inputs.push_back(in);
    }
  } else {
    report = screen(disp, options, seed);
  }
  for (auto& in : report.inputs) in.index = joint.pii()[static_cast<std::size_t>(in.index)];
  return report;
}

namespace {

int local_index(const JointGpModel& joint, int k) {
  const auto& pii = joint.pii();
  const auto it = std::find(pii.begin(), pii.end(), k);
  if (it == pii.end())
    throw ConfigError("index-domain error: input " + std::to_string(k) +
                      " is not an explanatory input; only subsets of the PII have estimable indices");
  return static_cast<int>(it - pii.begin());
}

BatchFunction mean_predictor(const JointGpModel& joint) {
  return [&joint](const Matrix& x) { return joint.predict_mean_only(x); };
}

SobolSettings with_identity_variance(const JointGpModel& joint, const InputSpace& space, SobolSettings s,
                                     std::uint64_t seed) {
  if (!s.variance) s.variance = variance_decomposition(joint, space, s.n, derive_seed(seed, "variance")).var_y;
  return s;
}

}  // namespace

IndexEstimate sobol_first(const JointGpModel& joint, const InputSpace& space, const IndexList& u,
                          const SobolSettings& settings, std::uint64_t seed) {
  IndexList local;
  for (int k : u) local.push_back(local_index(joint, k));
  return sobol_first(mean_predictor(joint), space.subset(joint.pii()), local,
                     with_identity_variance(joint, space, settings, seed), derive_seed(seed, "pick-freeze"));
}

IndexEstimate sobol_second(const JointGpModel& joint, const InputSpace& space, int i, int j,
                           const SobolSettings& settings, std::uint64_t seed) {
  const int a = local_index(joint, i), b = local_index(joint, j);
  return sobol_second(mean_predictor(joint), space.subset(joint.pii()), a, b,
                      with_identity_variance(joint, space, settings, seed), derive_seed(seed, "pick-freeze"));
}

IndexEstimate sobol_total_pii(const JointGpModel& joint, const InputSpace& space, int k,
                              const SobolSettings& settings, std::uint64_t seed) {
  return sobol_total(mean_predictor(joint), space.subset(joint.pii()), local_index(joint, k), settings,
                     derive_seed(seed, "pick-freeze"));
}

double clamp_index(double value) { return std::clamp(value, 0.0, 1.0); }

SobolReport sobol_analysis(const JointGpModel& joint, const InputSpace& space, const LearningSample& sample,
                           const SobolOptions& options, std::uint64_t seed) {
  SobolReport report;
  report.mc_size = options.n;
  report.var_y_empirical = sample_variance(sample.y);
  report.decomposition = variance_decomposition(joint, space, options.n, derive_seed(seed, "variance"));
  report.s_t_eps = total_index_eps(joint, space, options.n, derive_seed(seed, "eps"), options.bootstrap);

  const IndexList& pii = joint.pii();
  const InputSpace sub = space.subset(pii);
  const BatchFunction f = [&joint](const Matrix& x) { return joint.predict_mean_only(x); };
  auto name_of = [&](int k) {
    return k < static_cast<int>(sample.names.size()) ? sample.names[static_cast<std::size_t>(k)]
                                                     : "X" + std::to_string(k + 1);
  };

  SobolSettings first{options.n, options.bootstrap, report.decomposition.var_y};
  SobolSettings total{options.n, options.bootstrap, std::nullopt};
  const std::uint64_t pf_seed = derive_seed(seed, "pick-freeze");
  for (int c = 0; c < sub.dimension(); ++c) {
    const int k = pii[static_cast<std::size_t>(c)];
    report.first.push_back({k, name_of(k), sobol_first(f, sub, {c}, first, pf_seed)});
    report.total_pii.push_back({k, name_of(k), sobol_total(f, sub, c, total, pf_seed)});
  }
  const int limit = std::min(sub.dimension(), std::max(options.max_second_order_inputs, 0));
  for (int a = 0; a < limit; ++a)
    for (int b = a + 1; b < limit; ++b)
      report.second.push_back({pii[static_cast<std::size_t>(a)], pii[static_cast<std::size_t>(b)],
                               sobol_second(f, sub, a, b, first, pf_seed)});
  return report;
}

}  // namespace uqpipe

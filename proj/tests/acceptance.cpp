// Acceptance checks. Each criterion prints exactly one line:
//   criterion N: PASS|FAIL  <measured values and the thresholds they were held to>
// and the process exits 0 on PASS, 1 on FAIL. With --allow-fail a FAIL line
// still prints but exits 0; only errors that stop the check exit 1.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "oracles.hpp"
#include "uqpipe/bench.hpp"
#include "uqpipe/design.hpp"
#include "uqpipe/gp.hpp"
#include "uqpipe/joint_gp.hpp"
#include "uqpipe/pipeline.hpp"
#include "uqpipe/rng.hpp"
#include "uqpipe/screening.hpp"
#include "uqpipe/sensitivity.hpp"
#include "uqpipe/validation.hpp"

namespace fs = std::filesystem;
using namespace uqpipe;
using nlohmann::json;

namespace {

constexpr std::uint64_t kMaster = 20240501;

struct Outcome {
  bool pass = false;
  std::string detail;
};

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

LearningSample evaluate(const bench::BenchFunction& f, const Matrix& x) {
  return {f.space.names(), x, f.evaluate_rows(x)};
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("uqpipe-acceptance-" + name);
  fs::remove_all(p);
  return p;
}

// 1. HSIC estimator against the naive sum, and the permutation test level.
Outcome criterion1(int trials) {
  Stopwatch clock;
  Rng rng(derive_seed(kMaster, "c1"));
  Vector x(200), y(200);
  for (int i = 0; i < 200; ++i) {
    x(i) = open_uniform(rng);
    y(i) = std::sin(4.0 * x(i)) + 0.5 * standard_normal(rng);
  }
  const double diff =
      std::abs(hsic(x, y) - oracle::naive_hsic(x, y, oracle::sample_sd(x), oracle::sample_sd(y)));

  int rejected = 0;
  for (int t = 0; t < trials; ++t) {
    Rng r(derive_seed(kMaster, "c1-pairs", static_cast<std::uint64_t>(t)));
    Vector a(100), b(100);
    for (int i = 0; i < 100; ++i) a(i) = open_uniform(r);
    for (int i = 0; i < 100; ++i) b(i) = open_uniform(r);
    rejected += permutation_test(a, b, {}, 1000, derive_seed(kMaster, "c1-perm", static_cast<std::uint64_t>(t))) < 0.1;
  }
  const double level = static_cast<double>(rejected) / trials;
  const double secs = clock.seconds();
  const bool pass = diff <= 1e-12 && level >= 0.05 && level <= 0.15 && secs < 60.0;
  return {pass, "|matrix - naive| = " + fmt("%.2e", diff) + " (<= 1e-12); permutation level " + fmt("%.3f", level) +
                    " over " + std::to_string(trials) + " pairs (in [0.05, 0.15]); " + fmt("%.1f", secs) + " s (< 60)"};
}

// 2. Screening power on the 15-input g-function.
Outcome criterion2(int seeds) {
  Stopwatch clock;
  const auto f = bench::make_gfunction();
  ScreeningOptions opts;
  opts.alpha = 0.1;
  opts.method = TestMethod::gamma;
  int good = 0, all_active = 0;
  int inert_rejected_total = 0;
  for (int s = 0; s < seeds; ++s) {
    const std::uint64_t seed = derive_seed(kMaster, "c2", static_cast<std::uint64_t>(s));
    DesignMatrix d = lhs(500, 15, seed);
    d.attach_physical(f.space);
    const ScreeningReport rep = screen(evaluate(f, d.physical_points), opts, seed);
    bool active = true;
    int inert_rejected = 0;
    for (const auto& in : rep.inputs) {
      if (in.index < 4) active = active && in.selected;
      else inert_rejected += !in.selected;
    }
    all_active += active;
    inert_rejected_total += inert_rejected;
    good += active && inert_rejected >= 9;
  }
  const double secs = clock.seconds();
  const bool pass = good >= (90 * seeds + 99) / 100 && secs < 300.0;
  return {pass, std::to_string(good) + "/" + std::to_string(seeds) +
                    " seeds select all 4 active inputs and reject >= 9 of 11 inert (need >= 90/100); all active in " +
                    std::to_string(all_active) + "/" + std::to_string(seeds) + "; mean inert rejected " +
                    fmt("%.2f", static_cast<double>(inert_rejected_total) / seeds) + "/11; gamma test, n = 500; " +
                    fmt("%.1f", secs) + " s (< 300)"};
}

// 3. GP engine on noise-free Ishigami.
Outcome criterion3() {
  Stopwatch clock;
  const auto f = bench::make_ishigami();
  const std::uint64_t seed = derive_seed(kMaster, "c3");
  DesignMatrix d = optimize_lhs(lhs(200, 3, seed), 10000, seed);
  d.attach_physical(f.space);
  const LearningSample s = evaluate(f, d.physical_points);
  const GpModel gp = fit_gp(s, {0, 1, 2}, NuggetSpec::estimated(), FitOptions{}, seed);
  const double loo = loo_q2(gp);
  const Matrix xt = f.space.sample(1000, derive_seed(seed, "test"));
  const double held = q2(f.evaluate_rows(xt), gp.predict_mean(xt));

  DesignMatrix small = lhs(30, 3, derive_seed(seed, "loo"));
  small.attach_physical(f.space);
  const LearningSample s30 = evaluate(f, small.physical_points);
  FitOptions o;
  o.restarts = 2;
  const GpModel g30 = fit_gp(s30, {0, 1, 2}, NuggetSpec::estimated(), o, seed);
  const Vector brute = oracle::brute_force_loo(s30.x, s30.y, g30.kernel().lengthscales, g30.kernel().process_variance,
                                               g30.nugget().diagonal(30));
  const double loo_diff = (g30.leave_one_out().mean - brute).cwiseAbs().maxCoeff();
  const double secs = clock.seconds();
  const bool pass = loo >= 0.95 && held >= 0.95 && loo_diff <= 1e-8 && secs < 120.0;
  return {pass, "LOO Q2 " + fmt("%.4f", loo) + ", held-out Q2 " + fmt("%.4f", held) + " (both >= 0.95); virtual vs brute-force LOO " +
                    fmt("%.2e", loo_diff) + " (<= 1e-8); " + fmt("%.1f", secs) + " s (< 120)"};
}

// 5. Sobol' indices through the metamodel fitted on Ishigami.
Outcome criterion5() {
  Stopwatch clock;
  const auto f = bench::make_ishigami();
  const std::uint64_t seed = derive_seed(kMaster, "c5");
  DesignMatrix d = optimize_lhs(lhs(200, 3, seed), 10000, seed);
  d.attach_physical(f.space);
  const LearningSample s = evaluate(f, d.physical_points);
  const JointGpModel joint = build_joint(s, IndexList{0, 1, 2}, JointGpConfig{}, seed).model;
  SobolSettings st;
  st.n = 100000;
  const double s1 = sobol_first(joint, f.space, {0}, st, derive_seed(seed, 1)).estimate;
  const double s2 = sobol_first(joint, f.space, {1}, st, derive_seed(seed, 2)).estimate;
  const double s3 = sobol_first(joint, f.space, {2}, st, derive_seed(seed, 3)).estimate;
  const double t3 = sobol_total_pii(joint, f.space, 2, st, derive_seed(seed, 4)).estimate;

  const auto q = oracle::ishigami_quadrature();
  const double r1 = q.v1 / q.variance, r2 = q.v2 / q.variance, rt3 = q.v13 / q.variance;
  const double secs = clock.seconds();
  const bool pass = std::abs(s1 - r1) <= 0.05 && std::abs(s2 - r2) <= 0.05 && std::abs(s3) <= 0.03 &&
                    std::abs(t3 - rt3) <= 0.05 && secs < 120.0;
  return {pass, "S1 " + fmt("%.4f", s1) + " vs " + fmt("%.4f", r1) + ", S2 " + fmt("%.4f", s2) + " vs " + fmt("%.4f", r2) +
                    " (+-0.05); S3 " + fmt("%.4f", s3) + " (|.| <= 0.03); S3T " + fmt("%.4f", t3) + " vs " +
                    fmt("%.4f", rt3) + " (+-0.05); " + fmt("%.1f", secs) + " s (< 120)"};
}

// 6. Dispersion-based total index of the uncontrollable group.
Outcome criterion6() {
  const fs::path dir = scratch("c6");
  RunConfig cfg = config_from_json(json{{"model", {{"name", "hetero-ishigami"}}}, {"design", {{"n", 400}}}});
  cfg.seed = derive_seed(kMaster, "c6");
  const json rep = run_pipeline(cfg, {dir, {"sobol"}});
  fs::remove_all(dir);
  const json& sob = rep.at("stages").at("sobol");
  const double eps = sob.at("s_t_eps").at("estimate").get<double>();
  const double var_m = sob.at("decomposition").at("var_mean_component").get<double>();
  const double e_d = sob.at("decomposition").at("mean_dispersion_component").get<double>();
  const double ref_eps = oracle::hetero_ishigami_eps_index(1000, 1000, 19);
  const double ref_var = oracle::hetero_ishigami_variance(1000000, 18);
  const double gap = std::abs(var_m + e_d - ref_var) / ref_var;
  const bool pass = std::abs(eps - ref_eps) <= 0.05 && gap <= 0.15;
  return {pass, "S_T^eps " + fmt("%.4f", eps) + " vs nested MC " + fmt("%.4f", ref_eps) + " (+-0.05); Var(Y_m) + E(Y_d) = " +
                    fmt("%.4f", var_m + e_d) + " vs brute-force Var(Y) " + fmt("%.4f", ref_var) + ", relative gap " +
                    fmt("%.4f", gap) + " (<= 0.15)"};
}

// Shared campaign for criteria 4, 7 and 8: default pipeline on hetero-ishigami,
// one run per seed, keeping only the numbers those criteria need.
json campaign_record(int s) {
  const fs::path dir = scratch("campaign-" + std::to_string(s));
  RunConfig cfg = config_from_json(json{{"model", {{"name", "hetero-ishigami"}}}});
  cfg.seed = derive_seed(kMaster, "campaign", static_cast<std::uint64_t>(s));
  const json rep = run_pipeline(cfg, {dir, {"validate", "quantile"}});
  fs::remove_all(dir);
  const json& st = rep.at("stages");
  const json& steps = st.at("fit").at("trace").at("steps");
  json q = json::object();
  for (const auto& e : st.at("quantile").at("methods")) q[e.at("method").get<std::string>()] = e;
  return {{"seed", cfg.seed},
          {"pii", st.at("fit").at("pii")},
          {"q2_first", steps.front().at("loo_q2")},
          {"q2_last", steps.back().at("loo_q2")},
          {"coverage_het", st.at("validate").at("test").at("coverage_heteroscedastic").at("max_deviation")},
          {"coverage_hom", st.at("validate").at("test").at("coverage_homoscedastic").at("max_deviation")},
          {"quantile", q}};
}

json load_or_run_campaign(const fs::path& cache, int seeds) {
  const std::string tag = config_to_json(config_from_json(json{{"model", {{"name", "hetero-ishigami"}}}})).dump() +
                          "|" + std::to_string(kMaster);
  if (fs::exists(cache)) {
    try {
      json doc = json::parse(read_file(cache));
      if (doc.at("tag") == tag && doc.at("records").size() == static_cast<std::size_t>(seeds)) return doc;
    } catch (const json::exception&) {
    }
  }
  json records = json::array();
  Stopwatch clock;
  for (int s = 0; s < seeds; ++s) {
    records.push_back(campaign_record(s));
    std::fprintf(stderr, "campaign seed %d/%d done (%.0f s)\n", s + 1, seeds, clock.seconds());
  }
  json doc = {{"tag", tag}, {"records", records}, {"seconds", clock.seconds()}};
  std::ofstream(cache, std::ios::binary) << doc.dump(1) << "\n";
  return doc;
}

Outcome criterion4(const json& campaign) {
  const auto& recs = campaign.at("records");
  int ok = 0;
  for (const auto& r : recs) ok += r.at("q2_last").get<double>() >= r.at("q2_first").get<double>();
  const int n = static_cast<int>(recs.size());
  return {ok >= (95 * n + 99) / 100, std::to_string(ok) + "/" + std::to_string(n) +
                                         " seeds with final-step LOO Q2 >= first-step LOO Q2 (need >= 95/100)"};
}

Outcome criterion7(const json& campaign) {
  const auto& recs = campaign.at("records");
  int ok = 0, within = 0, direction = 0;
  for (const auto& r : recs) {
    const double het = r.at("coverage_het").get<double>(), hom = r.at("coverage_hom").get<double>();
    within += het <= 0.10;
    direction += het <= hom;
    ok += het <= 0.10 && het <= hom;
  }
  const int n = static_cast<int>(recs.size());
  return {ok >= (80 * n + 99) / 100,
          std::to_string(ok) + "/" + std::to_string(n) + " seeds with heteroscedastic max|observed - alpha| <= 0.10 and <= homoscedastic (need >= 80/100); " +
              "<= 0.10 alone in " + std::to_string(within) + ", no worse than homoscedastic in " + std::to_string(direction)};
}

Outcome criterion8(const json& campaign) {
  const double ref = oracle::hetero_ishigami_quantile(0.95, 1000000, 17);
  const auto& recs = campaign.at("records");
  int contains = 0, below = 0, closer = 0;
  for (const auto& r : recs) {
    const json& q = r.at("quantile");
    const json& full = q.at("fullgp-heteroscedastic");
    const double lo = full.at("ci").at(0).get<double>(), hi = full.at("ci").at(1).get<double>();
    contains += lo <= ref && ref <= hi;
    below += q.at("plugin-heteroscedastic").at("estimate").get<double>() < ref;
    closer += std::abs(full.at("estimate").get<double>() - ref) <
              std::abs(q.at("empirical").at("estimate").get<double>() - ref);
  }
  const int n = static_cast<int>(recs.size());
  const bool pass = contains >= (80 * n + 99) / 100 && below >= (80 * n + 99) / 100 && 2 * closer > n;
  return {pass, "reference q0.95 " + fmt("%.4f", ref) + " (1e6 draws); full-GP heteroscedastic 90% CI contains it in " +
                    std::to_string(contains) + "/" + std::to_string(n) + " (need >= 80/100); plug-in below it in " +
                    std::to_string(below) + "/" + std::to_string(n) + " (need >= 80/100); full-GP closer than empirical in " +
                    std::to_string(closer) + "/" + std::to_string(n) + " (need a majority)"};
}

// 9. Byte-identical reports across runs and thread counts.
Outcome criterion9() {
  std::string detail;
  bool pass = true;
  for (const std::string& model : bench::bench_names()) {
    RunConfig cfg = config_from_json(json{{"model", {{"name", model}}}});
    const fs::path a = scratch("c9-a"), b = scratch("c9-b"), c = scratch("c9-c");
    run_pipeline(cfg, {a, {}});
    run_pipeline(cfg, {b, {}});
    cfg.threads = 4;
    run_pipeline(cfg, {c, {}});
    bool same = true;
    for (const auto& f : {"report.json", "summary.txt", "model.json", "learning.csv", "coverage.csv"}) {
      const std::string ra = read_file(a / f);
      same = same && !ra.empty() && ra == read_file(b / f) && ra == read_file(c / f);
    }
    pass = pass && same;
    detail += model + (same ? " identical" : " DIFFERS") + "; ";
    for (const auto& p : {a, b, c}) fs::remove_all(p);
  }
  return {pass, detail + "two runs at 1 thread and one at 4 threads, default config, seed 1"};
}

// 10. Annealing improves the centered L2 discrepancy.
Outcome criterion10(int seeds) {
  int improved = 0;
  double ratio = 0.0;
  for (int s = 0; s < seeds; ++s) {
    const std::uint64_t seed = derive_seed(kMaster, "c10", static_cast<std::uint64_t>(s));
    const DesignMatrix in = lhs(50, 5, seed);
    const DesignMatrix out = optimize_lhs(in, 10000, derive_seed(seed, 1));
    const double before = centered_l2_discrepancy(in.unit_points), after = centered_l2_discrepancy(out.unit_points);
    improved += after < before;
    ratio += after / before / seeds;
  }
  return {improved >= (95 * seeds + 99) / 100,
          std::to_string(improved) + "/" + std::to_string(seeds) + " trials with lower discrepancy than the random LHS (need >= 95/100); mean ratio " +
              fmt("%.3f", ratio)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance checks"};
  int criterion = 0;
  bool campaign_only = false;
  bool allow_fail = false;
  std::string cache = "acceptance_campaign.json";
  app.add_option("--criterion", criterion, "criterion number 1..10")->check(CLI::Range(1, 10));
  app.add_flag("--campaign", campaign_only, "run (or reuse) the shared campaign for criteria 4, 7, 8");
  app.add_option("--campaign-file", cache, "campaign cache file");
  app.add_flag("--allow-fail", allow_fail, "report FAIL without a failing exit status");
  CLI11_PARSE(app, argc, argv);

  const int seeds = 100;
  try {
    if (campaign_only) {
      const json c = load_or_run_campaign(cache, seeds);
      std::printf("campaign: %zu seeds ready (%.0f s)\n", c.at("records").size(), c.value("seconds", 0.0));
      return 0;
    }
    Outcome o;
    switch (criterion) {
      case 1: o = criterion1(200); break;
      case 2: o = criterion2(seeds); break;
      case 3: o = criterion3(); break;
      case 4: o = criterion4(load_or_run_campaign(cache, seeds)); break;
      case 5: o = criterion5(); break;
      case 6: o = criterion6(); break;
      case 7: o = criterion7(load_or_run_campaign(cache, seeds)); break;
      case 8: o = criterion8(load_or_run_campaign(cache, seeds)); break;
      case 9: o = criterion9(); break;
      case 10: o = criterion10(seeds); break;
      default:
        std::fprintf(stderr, "choose --criterion 1..10 or --campaign\n");
        return 2;
    }
    std::printf("criterion %d: %s  %s\n", criterion, o.pass ? "PASS" : "FAIL", o.detail.c_str());
    return o.pass || allow_fail ? 0 : 1;
  } catch (const std::exception& e) {
    std::printf("criterion %d: FAIL  error: %s\n", criterion, e.what());
    return 1;
  }
}

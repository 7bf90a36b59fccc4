#include "uqpipe/pipeline.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "uqpipe/bench.hpp"
#include "uqpipe/csv.hpp"
#include "uqpipe/design.hpp"
#include "uqpipe/errors.hpp"
#include "uqpipe/report.hpp"
#include "uqpipe/rng.hpp"
#include "uqpipe/validation.hpp"
#include "uqpipe/version.hpp"

namespace uqpipe {

namespace fs = std::filesystem;

namespace {

// ---------------------------------------------------------------- config

class Section {
 public:
  Section(const json& doc, std::string path) : doc_(doc), path_(std::move(path)) {
    if (!doc_.is_object()) throw ConfigError("config: '" + path_ + "' must be an object");
  }

  template <typename T>
  T get(const std::string& key, T fallback) {
    used_.insert(key);
    if (!doc_.contains(key)) return fallback;
    try {
      return doc_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError("config: '" + where(key) + "' has the wrong type");
    }
  }

  const json* child(const std::string& key) {
    used_.insert(key);
    return doc_.contains(key) ? &doc_.at(key) : nullptr;
  }

  std::string where(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  void finish() const {
    for (const auto& [key, _] : doc_.items())
      if (!used_.count(key)) throw ConfigError("config: unknown key '" + where(key) + "'");
  }

 private:
  const json& doc_;
  std::string path_;
  std::set<std::string> used_;
};

const json kEmpty = json::object();

const json& sub(Section& s, const std::string& key) {
  const json* j = s.child(key);
  return j ? *j : kEmpty;
}

void require(bool ok, const std::string& msg) {
  if (!ok) throw ConfigError("config: " + msg);
}

std::pair<double, double> bounds(Section& s, const std::string& key, std::pair<double, double> fallback) {
  const auto v = s.get<std::vector<double>>(key, {fallback.first, fallback.second});
  require(v.size() == 2 && v[0] > 0.0 && v[0] < v[1], "'" + s.where(key) + "' must be [lo, hi] with 0 < lo < hi");
  return {v[0], v[1]};
}

// ---------------------------------------------------------------- run state

struct RunLock {
  fs::path path;
  explicit RunLock(const fs::path& dir) : path(dir / ".uqpipe.lock") {
    fs::create_directories(dir);
    std::FILE* f = std::fopen(path.string().c_str(), "wx");
    if (!f)
      throw ConfigError("run directory '" + dir.string() + "' is locked by another process (remove " +
                        path.string() + " if stale)");
    std::fputs("locked\n", f);
    std::fclose(f);
  }
  ~RunLock() {
    std::error_code ec;
    fs::remove(path, ec);
  }
  RunLock(const RunLock&) = delete;
  RunLock& operator=(const RunLock&) = delete;
};

struct Context {
  const RunConfig& cfg;
  InputSpace space;
  fs::path dir;
  std::optional<DesignMatrix> design;
  std::optional<LearningSample> sample;
  std::optional<LearningSample> test;
  std::optional<ScreeningReport> screening;
  std::optional<JointGpModel> joint;
};

struct StageResult {
  json section;
  json payload;  // state needed by downstream stages when reloaded from cache
};

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) return "";
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_text(const fs::path& p, const std::string& text) {
  const fs::path tmp = p.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write '" + p.string() + "'");
    out << text;
    if (!out) throw DataError("write failed for '" + p.string() + "'");
  }
  fs::rename(tmp, p);
}

fs::path resolve(const RunConfig& cfg, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() || cfg.base_dir.empty() ? path : cfg.base_dir / path;
}

bool external_learning_x(const RunConfig& cfg) { return cfg.source == "external" && !cfg.learning_x.empty(); }

std::vector<std::string> dependencies(const RunConfig& cfg, const std::string& stage) {
  if (stage == "ingest") return external_learning_x(cfg) ? std::vector<std::string>{} : std::vector<std::string>{"design"};
  if (stage == "screen") return {"ingest"};
  if (stage == "fit") return {"ingest", "screen"};
  if (stage == "validate" || stage == "sobol" || stage == "quantile") return {"ingest", "fit"};
  return {};
}

json stage_settings(const RunConfig& cfg, const std::string& stage) {
  const json c = config_to_json(cfg);
  if (stage == "design") return c.at("design");
  if (stage == "ingest") {
    json s = {{"model", c.at("model")}, {"test_n", c.at("validation").at("test_n")}};
    if (cfg.source == "external") {
      // External data enter the key by content, not by name.
      for (const auto& key : {"learning_x", "learning_y", "test_x", "test_y"}) {
        const std::string p = c.at("model").value(key, std::string());
        if (p.empty()) continue;
        const fs::path full = resolve(cfg, p);
        s["content"][key] = fs::exists(full) ? content_hash(read_bytes(full)) : "missing";
      }
    }
    return s;
  }
  if (stage == "screen") return c.at("screening");
  if (stage == "fit") return c.at("gp");
  if (stage == "validate") return c.at("validation");
  if (stage == "sobol") return c.at("sobol");
  return c.at("quantile");
}

[[noreturn]] void rethrow_stage(const Error& e, const std::string& stage) {
  const std::string msg = "[stage " + stage + "] " + e.what();
  switch (e.exit_code()) {
    case 2: throw ConfigError(msg);
    case 3: throw DataError(msg);
    default: throw NumericalError(msg);
  }
}

json gp_summary(const GpModel& gp) {
  const Vector& l = gp.kernel().lengthscales;
  return {{"lengthscales", std::vector<double>(l.data(), l.data() + l.size())},
          {"process_variance", gp.kernel().process_variance},
          {"nugget", nugget_kind_name(gp.nugget().kind)},
          {"nugget_variance", gp.nugget().variance},
          {"nll", gp.nll()}};
}

json sample_payload(const LearningSample& s) {
  return {{"names", s.names}, {"x", matrix_to_json(s.x)}, {"y", std::vector<double>(s.y.data(), s.y.data() + s.y.size())}};
}

LearningSample sample_from_payload(const json& j) {
  LearningSample s;
  s.names = j.at("names").get<std::vector<std::string>>();
  s.x = matrix_from_json(j.at("x"));
  const auto y = j.at("y").get<std::vector<double>>();
  s.y = Eigen::Map<const Vector>(y.data(), static_cast<Eigen::Index>(y.size()));
  return s;
}

// ---------------------------------------------------------------- stages

StageResult run_design(Context& ctx, std::uint64_t seed) {
  const int d = ctx.space.dimension();
  DesignMatrix initial = lhs(ctx.cfg.design_n, d, derive_seed(seed, "lhs"));
  DesignMatrix best = optimize_lhs(initial, ctx.cfg.design_iterations, derive_seed(seed, "anneal"));
  best.attach_physical(ctx.space);
  export_design_for_simulator(best, ctx.space, ctx.dir / "design.csv");
  StageResult r;
  r.section = {{"n", best.size()},
               {"dimension", d},
               {"iterations", ctx.cfg.design_iterations},
               {"discrepancy_initial", centered_l2_discrepancy(initial.unit_points)},
               {"discrepancy_optimized", centered_l2_discrepancy(best.unit_points)},
               {"file", "design.csv"}};
  if (ctx.cfg.design_n < 10 * d)
    r.section["warning"] = "n = " + std::to_string(ctx.cfg.design_n) + " is below the 10 d rule of thumb (" +
                           std::to_string(10 * d) + ")";
  r.payload = {{"unit_points", matrix_to_json(best.unit_points)}};
  ctx.design = std::move(best);
  return r;
}

void load_design(Context& ctx, const StageResult& r) {
  DesignMatrix d;
  d.unit_points = matrix_from_json(r.payload.at("unit_points"));
  d.attach_physical(ctx.space);
  export_design_for_simulator(d, ctx.space, ctx.dir / "design.csv");
  ctx.design = std::move(d);
}

StageResult run_ingest(Context& ctx, std::uint64_t seed) {
  const RunConfig& cfg = ctx.cfg;
  LearningSample sample;
  std::optional<LearningSample> test;
  if (cfg.source == "builtin") {
    const bench::BenchFunction f = bench::make_bench(cfg.model);
    sample.names = ctx.space.names();
    sample.x = ctx.design->physical_points;
    sample.y = f.evaluate_rows(sample.x);
    if (cfg.test_n > 0) {
      LearningSample t;
      t.names = sample.names;
      t.x = ctx.space.sample(cfg.test_n, derive_seed(seed, "test"));
      t.y = f.evaluate_rows(t.x);
      test = std::move(t);
    }
  } else {
    if (cfg.learning_y.empty()) throw ConfigError("external model needs model.learning_y");
    if (!cfg.learning_x.empty()) {
      sample = ingest_sample(resolve(cfg, cfg.learning_x), cfg.learning_y, &ctx.space);
    } else {
      const fs::path y_path = resolve(cfg, cfg.learning_y);
      if (!fs::exists(y_path))
        throw DataError("waiting for simulator outputs: evaluate " + (ctx.dir / "design.csv").string() +
                        " and write one output column to " + y_path.string());
      sample.names = ctx.space.names();
      sample.x = ctx.design->physical_points;
      sample.y = read_simulator_outputs(y_path, static_cast<int>(sample.x.rows()));
    }
    if (!cfg.test_x.empty()) {
      if (cfg.test_y.empty()) throw ConfigError("model.test_x given without model.test_y");
      test = ingest_sample(resolve(cfg, cfg.test_x), cfg.test_y, &ctx.space);
    }
  }
  write_sample(ctx.dir / "learning.csv", sample);
  if (test) write_sample(ctx.dir / "test.csv", *test);

  StageResult r;
  r.section = {{"source", cfg.source},
               {"n", sample.size()},
               {"dimension", sample.dimension()},
               {"output_variance", sample_variance(sample.y)},
               {"file", "learning.csv"},
               {"test_file", test ? json("test.csv") : json(nullptr)},
               {"test_n", test ? test->size() : 0}};
  r.payload = {{"learning", sample_payload(sample)}, {"test", test ? sample_payload(*test) : json(nullptr)}};
  ctx.sample = std::move(sample);
  ctx.test = std::move(test);
  return r;
}

void load_ingest(Context& ctx, const StageResult& r) {
  ctx.sample = sample_from_payload(r.payload.at("learning"));
  if (!r.payload.at("test").is_null()) ctx.test = sample_from_payload(r.payload.at("test"));
  write_sample(ctx.dir / "learning.csv", *ctx.sample);
  if (ctx.test) write_sample(ctx.dir / "test.csv", *ctx.test);
}

StageResult run_screen(Context& ctx, std::uint64_t seed) {
  ScreeningOptions opts = ctx.cfg.screening;
  opts.threads = ctx.cfg.threads;
  ctx.screening = screen(*ctx.sample, opts, seed);
  return {to_json(*ctx.screening), nullptr};
}

void load_screen(Context& ctx, const StageResult& r) { ctx.screening = screening_from_json(r.section); }

StageResult run_fit(Context& ctx, std::uint64_t seed) {
  JointGpConfig gp = ctx.cfg.gp;
  gp.fit.threads = ctx.cfg.threads;
  JointBuild build = build_joint(*ctx.sample, *ctx.screening, gp, seed);
  const JointGpModel& m = build.model;
  const json model = m.to_json();
  write_text(ctx.dir / "model.json", model.dump(2) + "\n");
  auto names = [&](const IndexList& idx) {
    std::vector<std::string> out;
    for (int k : idx) out.push_back(ctx.sample->names[static_cast<std::size_t>(k)]);
    return out;
  };
  StageResult r;
  r.section = {{"pii", names(m.pii())},
               {"eps_group", names(m.eps_group())},
               {"trace", to_json(build.trace)},
               {"dispersion_floor", m.dispersion_floor()},
               {"gp_m1", gp_summary(m.gp_m1())},
               {"gp_v1", gp_summary(m.gp_v1())},
               {"gp_m2", gp_summary(m.gp_m2())},
               {"gp_v2", gp_summary(m.gp_v2())},
               {"file", "model.json"}};
  r.payload = model;
  ctx.joint = std::move(build.model);
  return r;
}

void load_fit(Context& ctx, const StageResult& r) {
  ctx.joint = JointGpModel::from_json(r.payload);
  write_text(ctx.dir / "model.json", r.payload.dump(2) + "\n");
}

StageResult run_validate(Context& ctx, std::uint64_t) {
  const JointGpModel& m = *ctx.joint;
  const LooResult loo_homo = m.gp_m1().leave_one_out();
  const LooResult loo_hetero = m.gp_m2().leave_one_out();
  {
    Matrix scatter(ctx.sample->size(), 3);
    scatter << ctx.sample->y, loo_homo.mean, loo_hetero.mean;
    write_csv(ctx.dir / "loo.csv", {"y", "loo_homoscedastic", "loo_heteroscedastic"}, scatter);
  }
  StageResult r;
  r.section = {{"loo_q2", {{"homoscedastic", loo_q2(m.gp_m1())}, {"heteroscedastic", loo_q2(m)}}},
               {"loo_file", "loo.csv"},
               {"test", nullptr}};
  if (ctx.test) {
    const LearningSample& t = *ctx.test;
    const Matrix xt = select_columns(t.x, m.pii());
    const std::vector<double> alphas = ctx.cfg.alphas.empty() ? default_alpha_grid() : ctx.cfg.alphas;
    const CoverageCurve hetero = coverage_curve(m, t, alphas);
    const CoverageCurve homo = coverage_curve_homoscedastic(m, t, alphas);
    Matrix cov(static_cast<Eigen::Index>(alphas.size()), 3);
    for (std::size_t k = 0; k < alphas.size(); ++k) {
      const auto i = static_cast<Eigen::Index>(k);
      cov(i, 0) = hetero.alphas[k];
      cov(i, 1) = hetero.observed[k];
      cov(i, 2) = homo.observed[k];
    }
    write_csv(ctx.dir / "coverage.csv", {"alpha", "observed_heteroscedastic", "observed_homoscedastic"}, cov);
    r.section["test"] = {{"n", t.size()},
                         {"q2_homoscedastic", q2(t.y, m.gp_m1().predict_mean(xt))},
                         {"q2_heteroscedastic", q2(t.y, m.predict_mean_only(xt))},
                         {"coverage_heteroscedastic", to_json(hetero)},
                         {"coverage_homoscedastic", to_json(homo)},
                         {"coverage_file", "coverage.csv"}};
  }
  return r;
}

StageResult run_sobol(Context& ctx, std::uint64_t seed) {
  return {to_json(sobol_analysis(*ctx.joint, ctx.space, *ctx.sample, ctx.cfg.sobol, seed)), nullptr};
}

StageResult run_quantile(Context& ctx, std::uint64_t seed) {
  json s = to_json(quantile_analysis(*ctx.joint, ctx.space, ctx.sample->y, ctx.cfg.quantile, seed));
  const auto& q = ctx.cfg.quantile;
  s["settings"] = {{"plugin_n", q.plugin_n},
                   {"bootstrap", q.bootstrap},
                   {"n_points", q.fullgp.n_points},
                   {"n_traj", q.fullgp.n_traj},
                   {"learning_n", ctx.sample->size()}};
  return {s, nullptr};
}

StageResult execute(Context& ctx, const std::string& stage, std::uint64_t seed) {
  if (stage == "design") return run_design(ctx, seed);
  if (stage == "ingest") return run_ingest(ctx, seed);
  if (stage == "screen") return run_screen(ctx, seed);
  if (stage == "fit") return run_fit(ctx, seed);
  if (stage == "validate") return run_validate(ctx, seed);
  if (stage == "sobol") return run_sobol(ctx, seed);
  return run_quantile(ctx, seed);
}

void restore(Context& ctx, const std::string& stage, const StageResult& r) {
  if (stage == "design") load_design(ctx, r);
  else if (stage == "ingest") load_ingest(ctx, r);
  else if (stage == "screen") load_screen(ctx, r);
  else if (stage == "fit") load_fit(ctx, r);
}

std::string summary_text(const json& report, const Context& ctx) {
  std::ostringstream out;
  const json& st = report.at("stages");
  out << "uqpipe " << kVersion << " run summary\n";
  out << "seed " << report.at("provenance").at("seed").get<std::uint64_t>() << ", config "
      << report.at("provenance").at("config_hash").get<std::string>() << "\n\n";
  for (const auto& name : stage_names()) {
    const json& s = st.at(name);
    if (s.at("status") != "completed") {
      out << name << ": skipped\n\n";
      continue;
    }
    if (name == "design") {
      char buf[160];
      std::snprintf(buf, sizeof buf, "Design: n = %d, centered L2 discrepancy %.6g -> %.6g\n\n",
                    s.at("n").get<int>(), s.at("discrepancy_initial").get<double>(),
                    s.at("discrepancy_optimized").get<double>());
      out << buf;
    } else if (name == "ingest") {
      out << "Learning sample: n = " << s.at("n").get<int>() << ", test n = " << s.at("test_n").get<int>()
          << "\n\n";
    } else if (name == "screen") {
      out << screening_table(screening_from_json(s)) << "\n";
    } else if (name == "fit") {
      out << build_table(build_trace_from_json(s.at("trace"))) << "\n";
    } else if (name == "validate") {
      char buf[200];
      std::snprintf(buf, sizeof buf, "Validation: LOO Q2 homoscedastic %.4f, heteroscedastic %.4f\n",
                    s.at("loo_q2").at("homoscedastic").get<double>(),
                    s.at("loo_q2").at("heteroscedastic").get<double>());
      out << buf;
      if (!s.at("test").is_null()) {
        const json& t = s.at("test");
        std::snprintf(buf, sizeof buf,
                      "Test (n = %d): Q2 homoscedastic %.4f, heteroscedastic %.4f; coverage max deviation "
                      "homoscedastic %.4f, heteroscedastic %.4f\n",
                      t.at("n").get<int>(), t.at("q2_homoscedastic").get<double>(),
                      t.at("q2_heteroscedastic").get<double>(),
                      t.at("coverage_homoscedastic").at("max_deviation").get<double>(),
                      t.at("coverage_heteroscedastic").at("max_deviation").get<double>());
        out << buf;
      }
      out << "\n";
    } else if (name == "sobol") {
      out << sobol_table(sobol_from_json(s)) << "\n";
    } else {
      out << quantile_table(quantile_from_json(s)) << "\n";
    }
  }
  (void)ctx;
  return out.str();
}

}  // namespace

const std::vector<std::string>& stage_names() {
  static const std::vector<std::string> names = {"design", "ingest", "screen", "fit", "validate", "sobol", "quantile"};
  return names;
}

std::string content_hash(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

RunConfig config_from_json(const json& doc, const fs::path& base_dir) {
  RunConfig c;
  c.base_dir = base_dir;
  Section top(doc, "");
  {
    Section m(sub(top, "model"), "model");
    c.source = m.get<std::string>("source", c.source);
    c.model = m.get<std::string>("name", c.model);
    if (const json* in = m.child("inputs")) c.inputs = input_space_from_json(*in);
    c.learning_x = m.get<std::string>("learning_x", "");
    c.learning_y = m.get<std::string>("learning_y", "");
    c.test_x = m.get<std::string>("test_x", "");
    c.test_y = m.get<std::string>("test_y", "");
    m.finish();
    require(c.source == "builtin" || c.source == "external", "model.source must be builtin or external");
    if (c.source == "builtin") (void)bench::make_bench(c.model);
    else require(c.inputs.has_value(), "external model needs model.inputs");
  }
  c.seed = top.get<std::uint64_t>("seed", c.seed);
  c.threads = top.get<int>("threads", c.threads);
  require(c.threads >= 1, "threads must be >= 1");
  {
    Section d(sub(top, "design"), "design");
    c.design_n = d.get<int>("n", c.design_n);
    c.design_iterations = d.get<int>("iterations", c.design_iterations);
    d.finish();
    require(c.design_n >= 2, "design.n must be >= 2");
    require(c.design_iterations >= 0, "design.iterations must be >= 0");
  }
  {
    Section s(sub(top, "screening"), "screening");
    c.screening.alpha = s.get<double>("alpha", c.screening.alpha);
    c.screening.method = parse_test_method(s.get<std::string>("method", test_method_name(c.screening.method)));
    c.screening.permutations = s.get<int>("permutations", c.screening.permutations);
    s.finish();
    require(c.screening.alpha > 0.0 && c.screening.alpha < 1.0, "screening.alpha must be in (0,1)");
    require(c.screening.permutations >= 100, "screening.permutations must be >= 100");
  }
  {
    Section g(sub(top, "gp"), "gp");
    FitOptions& f = c.gp.fit;
    f.restarts = g.get<int>("restarts", f.restarts);
    f.max_iterations = g.get<int>("max_iterations", f.max_iterations);
    std::tie(f.lengthscale_lower, f.lengthscale_upper) =
        bounds(g, "lengthscale_bounds", {f.lengthscale_lower, f.lengthscale_upper});
    std::tie(f.nugget_ratio_lower, f.nugget_ratio_upper) =
        bounds(g, "nugget_ratio_bounds", {f.nugget_ratio_lower, f.nugget_ratio_upper});
    c.gp.floor_fraction = g.get<double>("floor_fraction", c.gp.floor_fraction);
    c.gp.early_stop = g.get<bool>("early_stop", c.gp.early_stop);
    c.gp.early_stop_gain = g.get<double>("early_stop_gain", c.gp.early_stop_gain);
    c.quantile.fullgp.max_points = g.get<int>("simulation_cap", c.quantile.fullgp.max_points);
    g.finish();
    require(f.restarts >= 1, "gp.restarts must be >= 1");
    require(f.max_iterations >= 1, "gp.max_iterations must be >= 1");
    require(c.gp.floor_fraction > 0.0, "gp.floor_fraction must be > 0");
    require(c.quantile.fullgp.max_points >= 2, "gp.simulation_cap must be >= 2");
  }
  {
    Section v(sub(top, "validation"), "validation");
    c.test_n = v.get<int>("test_n", c.test_n);
    c.alphas = v.get<std::vector<double>>("alphas", default_alpha_grid());
    v.finish();
    require(c.test_n >= 0, "validation.test_n must be >= 0");
    require(!c.alphas.empty(), "validation.alphas must not be empty");
    for (double a : c.alphas) require(a > 0.0 && a < 1.0, "validation.alphas must lie in (0,1)");
  }
  {
    Section s(sub(top, "sobol"), "sobol");
    c.sobol.n = s.get<int>("n", c.sobol.n);
    c.sobol.bootstrap = s.get<int>("bootstrap", c.sobol.bootstrap);
    c.sobol.max_second_order_inputs = s.get<int>("max_second_order_inputs", c.sobol.max_second_order_inputs);
    s.finish();
    require(c.sobol.n >= 10000, "sobol.n must be >= 10000");
    require(c.sobol.bootstrap >= 1, "sobol.bootstrap must be >= 1");
    require(c.sobol.max_second_order_inputs >= 0, "sobol.max_second_order_inputs must be >= 0");
  }
  {
    Section q(sub(top, "quantile"), "quantile");
    QuantileOptions& o = c.quantile;
    o.p = q.get<double>("p", o.p);
    o.plugin_n = q.get<int>("plugin_n", o.plugin_n);
    o.bootstrap = q.get<int>("bootstrap", o.bootstrap);
    o.level = q.get<double>("level", o.level);
    o.fullgp.n_points = q.get<int>("n_points", o.fullgp.n_points);
    o.fullgp.n_traj = q.get<int>("n_traj", o.fullgp.n_traj);
    q.finish();
    require(o.p > 0.0 && o.p < 1.0, "quantile.p must be in (0,1)");
    require(o.level > 0.0 && o.level < 1.0, "quantile.level must be in (0,1)");
    require(o.plugin_n >= 10000, "quantile.plugin_n must be >= 10000");
    require(o.bootstrap >= 500, "quantile.bootstrap must be >= 500");
    require(o.fullgp.n_traj >= 200, "quantile.n_traj must be >= 200");
    require(o.fullgp.n_points >= 2 && o.fullgp.n_points <= o.fullgp.max_points,
            "quantile.n_points must be in [2, gp.simulation_cap]");
  }
  top.finish();
  return c;
}

RunConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  json doc;
  try {
    doc = json::parse(in, nullptr, true, true);
  } catch (const json::exception& e) {
    throw ConfigError("config '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return config_from_json(doc, path.parent_path());
}

json config_to_json(const RunConfig& c) {
  json model = {{"source", c.source}};
  if (c.source == "builtin") {
    model["name"] = c.model;
  } else {
    model["inputs"] = to_json(*c.inputs);
    for (const auto& [key, value] : {std::pair{"learning_x", &c.learning_x}, std::pair{"learning_y", &c.learning_y},
                                     std::pair{"test_x", &c.test_x}, std::pair{"test_y", &c.test_y}})
      if (!value->empty()) model[key] = *value;
  }
  const FitOptions& f = c.gp.fit;
  return {{"model", model},
          {"seed", c.seed},
          {"design", {{"n", c.design_n}, {"iterations", c.design_iterations}}},
          {"screening",
           {{"alpha", c.screening.alpha},
            {"method", test_method_name(c.screening.method)},
            {"permutations", c.screening.permutations}}},
          {"gp",
           {{"restarts", f.restarts},
            {"max_iterations", f.max_iterations},
            {"lengthscale_bounds", {f.lengthscale_lower, f.lengthscale_upper}},
            {"nugget_ratio_bounds", {f.nugget_ratio_lower, f.nugget_ratio_upper}},
            {"floor_fraction", c.gp.floor_fraction},
            {"early_stop", c.gp.early_stop},
            {"early_stop_gain", c.gp.early_stop_gain},
            {"simulation_cap", c.quantile.fullgp.max_points}}},
          {"validation", {{"test_n", c.test_n}, {"alphas", c.alphas.empty() ? default_alpha_grid() : c.alphas}}},
          {"sobol",
           {{"n", c.sobol.n},
            {"bootstrap", c.sobol.bootstrap},
            {"max_second_order_inputs", c.sobol.max_second_order_inputs}}},
          {"quantile",
           {{"p", c.quantile.p},
            {"plugin_n", c.quantile.plugin_n},
            {"bootstrap", c.quantile.bootstrap},
            {"level", c.quantile.level},
            {"n_points", c.quantile.fullgp.n_points},
            {"n_traj", c.quantile.fullgp.n_traj}}}};
}

InputSpace config_space(const RunConfig& config) {
  if (config.source == "builtin") return bench::make_bench(config.model).space;
  if (!config.inputs) throw ConfigError("external model needs model.inputs");
  return *config.inputs;
}

json run_pipeline(const RunConfig& config, const PipelineOptions& options) {
  const auto& all = stage_names();
  std::set<std::string> wanted;
  for (const auto& s : options.stages) {
    if (std::find(all.begin(), all.end(), s) == all.end())
      throw ConfigError("unknown stage '" + s + "' (expected design|ingest|screen|fit|validate|sobol|quantile)");
    wanted.insert(s);
  }
  if (wanted.empty()) wanted.insert(all.begin(), all.end());
  // Close over dependencies, walking from the last stage backwards.
  for (auto it = all.rbegin(); it != all.rend(); ++it)
    if (wanted.count(*it))
      for (const auto& dep : dependencies(config, *it)) wanted.insert(dep);

  RunLock lock(options.out_dir);
  const fs::path cache_dir = options.out_dir / "stages";
  fs::create_directories(cache_dir);

  Context ctx{config, config_space(config), options.out_dir, {}, {}, {}, {}, {}};
  const json canonical = config_to_json(config);

  std::map<std::string, std::string> keys;
  for (const auto& stage : all) {
    std::string material = stage + "|" + std::to_string(config.seed) + "|" + stage_settings(config, stage).dump();
    for (const auto& dep : dependencies(config, stage)) material += "|" + keys.at(dep);
    keys[stage] = content_hash(material);
  }

  json stages = json::object();
  std::ofstream log(options.out_dir / "runs.log", std::ios::app | std::ios::binary);
  for (const auto& stage : all) {
    const fs::path cache = cache_dir / (stage + "-" + keys[stage] + ".json");
    const bool cached = fs::exists(cache);
    if (!wanted.count(stage)) {
      // Results of earlier runs stay in the report while their inputs are unchanged.
      stages[stage] = cached ? json::parse(read_bytes(cache)).at("section") : json{{"status", "skipped"}};
      continue;
    }
    const std::uint64_t seed = derive_seed(config.seed, stage, 0);
    StageResult r;
    try {
      if (cached) {
        const json doc = json::parse(read_bytes(cache));
        r = {doc.at("section"), doc.at("payload")};
        restore(ctx, stage, r);
      } else {
        r = execute(ctx, stage, seed);
        r.section["status"] = "completed";
        r.section["key"] = keys[stage];
        write_text(cache, json{{"stage", stage}, {"key", keys[stage]}, {"section", r.section}, {"payload", r.payload}}
                              .dump() + "\n");
      }
    } catch (const Error& e) {
      rethrow_stage(e, stage);
    } catch (const json::exception& e) {
      throw DataError("[stage " + stage + "] corrupt stage cache: " + e.what());
    }
    stages[stage] = r.section;
    log << stage << " " << keys[stage] << (cached ? " cached" : " computed") << "\n";
  }

  json report = {{"format", "uqpipe-report"},
                 {"version", 1},
                 {"artifact_version", kVersion},
                 {"provenance", {{"config_hash", content_hash(canonical.dump())}, {"seed", config.seed}}},
                 {"config", canonical},
                 {"stages", stages}};
  write_text(options.out_dir / "report.json", report.dump(2) + "\n");
  write_text(options.out_dir / "summary.txt", summary_text(report, ctx));
  return report;
}

}  // namespace uqpipe

#include "uqpipe/report.hpp"

#include <cstdio>
#include <sstream>

#include "uqpipe/errors.hpp"

namespace uqpipe {

namespace {

json vec(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vector vec_from(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

json estimate(const IndexEstimate& e) { return {{"estimate", e.estimate}, {"std_error", e.std_error}}; }

IndexEstimate estimate_from(const json& j) {
  return {j.at("estimate").get<double>(), j.at("std_error").get<double>()};
}

std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

std::string pad(std::string s, std::size_t width) {
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}

template <typename Fn>
auto guarded(const char* what, Fn&& fn) {
  try {
    return fn();
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed ") + what + ": " + e.what());
  }
}

}  // namespace

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) rows.push_back(vec(m.row(r).transpose()));
  return rows;
}

Matrix matrix_from_json(const json& j) {
  const auto rows = j.get<std::vector<std::vector<double>>>();
  if (rows.empty()) return Matrix();
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows[0].size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != rows[0].size()) throw DataError("ragged matrix in JSON document");
    for (std::size_t c = 0; c < rows[r].size(); ++c)
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
  }
  return m;
}

json to_json(const Marginal& m) {
  json j = {{"name", m.name()}, {"family", family_name(m.family())}, {"a", m.a()}, {"b", m.b()}};
  if (m.truncation()) j["truncation"] = {m.truncation()->first, m.truncation()->second};
  return j;
}

Marginal marginal_from_json(const json& j) {
  try {
    for (const auto& [key, _] : j.items())
      if (key != "name" && key != "family" && key != "a" && key != "b" && key != "truncation")
        throw ConfigError("unknown key '" + key + "' in input declaration");
    std::optional<std::pair<double, double>> trunc;
    if (j.contains("truncation")) {
      const auto t = j.at("truncation").get<std::vector<double>>();
      if (t.size() != 2) throw ConfigError("truncation must be [lo, hi]");
      trunc = std::make_pair(t[0], t[1]);
    }
    return Marginal(j.at("name").get<std::string>(), parse_family(j.at("family").get<std::string>()),
                    j.at("a").get<double>(), j.at("b").get<double>(), trunc);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed input declaration: ") + e.what());
  }
}

json to_json(const InputSpace& space) {
  json arr = json::array();
  for (const auto& m : space.marginals()) arr.push_back(to_json(m));
  return arr;
}

InputSpace input_space_from_json(const json& j) {
  if (!j.is_array()) throw ConfigError("inputs must be an array of marginal declarations");
  std::vector<Marginal> ms;
  for (const auto& m : j) ms.push_back(marginal_from_json(m));
  return InputSpace(std::move(ms));
}

json to_json(const ScreeningReport& report) {
  json inputs = json::array();
  for (const auto& in : report.inputs)
    inputs.push_back({{"name", in.name},
                      {"index", in.index},
                      {"hsic", in.hsic},
                      {"r2_hsic", in.r2_hsic},
                      {"p_value", in.p_value},
                      {"selected", in.selected},
                      {"rank", in.rank}});
  return {{"alpha", report.alpha},
          {"method", test_method_name(report.method)},
          {"permutations", report.permutations},
          {"inputs", inputs},
          {"pii", report.pii()}};
}

ScreeningReport screening_from_json(const json& j) {
  return guarded("screening report", [&] {
    ScreeningReport r;
    r.alpha = j.at("alpha").get<double>();
    r.method = parse_test_method(j.at("method").get<std::string>());
    r.permutations = j.at("permutations").get<int>();
    for (const auto& in : j.at("inputs"))
      r.inputs.push_back({in.at("name").get<std::string>(), in.at("index").get<int>(), in.at("hsic").get<double>(),
                          in.at("r2_hsic").get<double>(), in.at("p_value").get<double>(),
                          in.at("selected").get<bool>(), in.at("rank").get<int>()});
    return r;
  });
}

json to_json(const BuildTrace& trace) {
  json steps = json::array();
  for (const auto& s : trace.steps)
    steps.push_back({{"input", s.input},
                     {"name", s.name},
                     {"warm_start", vec(s.warm_start)},
                     {"loo_q2", s.loo_q2},
                     {"nll", s.nll},
                     {"warm_start_nll", s.warm_start_nll}});
  return {{"steps", steps}};
}

BuildTrace build_trace_from_json(const json& j) {
  return guarded("build trace", [&] {
    BuildTrace t;
    for (const auto& s : j.at("steps")) {
      BuildStep step;
      step.input = s.at("input").get<int>();
      step.name = s.at("name").get<std::string>();
      step.warm_start = vec_from(s.at("warm_start"));
      step.loo_q2 = s.at("loo_q2").is_number() ? s.at("loo_q2").get<double>()
                                                : std::numeric_limits<double>::quiet_NaN();
      step.nll = s.at("nll").get<double>();
      // An infeasible warm start is stored as null.
      step.warm_start_nll = s.at("warm_start_nll").is_number() ? s.at("warm_start_nll").get<double>()
                                                               : std::numeric_limits<double>::infinity();
      t.steps.push_back(step);
    }
    return t;
  });
}

json to_json(const CoverageCurve& curve) {
  return {{"alphas", curve.alphas}, {"observed", curve.observed}, {"max_deviation", curve.max_deviation()}};
}

CoverageCurve coverage_from_json(const json& j) {
  return guarded("coverage curve", [&] {
    return CoverageCurve{j.at("alphas").get<std::vector<double>>(), j.at("observed").get<std::vector<double>>()};
  });
}

json to_json(const SobolReport& report) {
  json first = json::array(), total = json::array(), second = json::array();
  for (const auto& e : report.first)
    first.push_back({{"input", e.input}, {"name", e.name}, {"value", estimate(e.value)}});
  for (const auto& e : report.total_pii)
    total.push_back({{"input", e.input}, {"name", e.name}, {"value", estimate(e.value)}});
  for (const auto& p : report.second)
    second.push_back({{"inputs", {p.first, p.second}}, {"value", estimate(p.value)}});
  return {{"first", first},
          {"second", second},
          {"total_pii", total},
          {"s_t_eps", estimate(report.s_t_eps)},
          {"var_y", {{"empirical", report.var_y_empirical}, {"metamodel", report.decomposition.var_y}}},
          {"decomposition",
           {{"var_mean_component", report.decomposition.var_mean_component},
            {"mean_dispersion_component", report.decomposition.mean_dispersion_component}}},
          {"normalization",
           {{"first", "metamodel Var(Y) = Var[Y_m] + E[Y_d]"},
            {"second", "metamodel Var(Y) = Var[Y_m] + E[Y_d]"},
            {"total_pii", "Var(Y_m) over the explanatory inputs"},
            {"s_t_eps", "metamodel Var(Y)"}}},
          {"mc_size", report.mc_size}};
}

SobolReport sobol_from_json(const json& j) {
  return guarded("Sobol' report", [&] {
    SobolReport r;
    for (const auto& e : j.at("first"))
      r.first.push_back({e.at("input").get<int>(), e.at("name").get<std::string>(), estimate_from(e.at("value"))});
    for (const auto& e : j.at("total_pii"))
      r.total_pii.push_back(
          {e.at("input").get<int>(), e.at("name").get<std::string>(), estimate_from(e.at("value"))});
    for (const auto& p : j.at("second"))
      r.second.push_back({p.at("inputs").at(0).get<int>(), p.at("inputs").at(1).get<int>(), estimate_from(p.at("value"))});
    r.s_t_eps = estimate_from(j.at("s_t_eps"));
    r.var_y_empirical = j.at("var_y").at("empirical").get<double>();
    r.decomposition.var_y = j.at("var_y").at("metamodel").get<double>();
    r.decomposition.var_mean_component = j.at("decomposition").at("var_mean_component").get<double>();
    r.decomposition.mean_dispersion_component = j.at("decomposition").at("mean_dispersion_component").get<double>();
    r.mc_size = j.at("mc_size").get<int>();
    return r;
  });
}

json to_json(const QuantileReport& report) {
  json methods = json::array();
  for (const auto& e : report.estimates) {
    json m = {{"method", e.method}, {"estimate", e.estimate}, {"ci", nullptr}};
    if (e.ci) m["ci"] = {e.ci->first, e.ci->second};
    methods.push_back(m);
  }
  return {{"p", report.p}, {"level", report.level}, {"methods", methods}};
}

QuantileReport quantile_from_json(const json& j) {
  return guarded("quantile report", [&] {
    QuantileReport r;
    r.p = j.at("p").get<double>();
    r.level = j.at("level").get<double>();
    for (const auto& m : j.at("methods")) {
      QuantileEstimate e{m.at("method").get<std::string>(), m.at("estimate").get<double>(), std::nullopt};
      if (!m.at("ci").is_null()) e.ci = std::make_pair(m.at("ci").at(0).get<double>(), m.at("ci").at(1).get<double>());
      r.estimates.push_back(e);
    }
    return r;
  });
}

std::string screening_table(const ScreeningReport& report) {
  std::ostringstream out;
  out << "HSIC screening (alpha = " << fmt("%.3g", report.alpha) << ", " << test_method_name(report.method);
  if (report.method == TestMethod::permutation) out << ", B = " << report.permutations;
  out << ")\n";
  out << pad("input", 14) << pad("R2_HSIC", 12) << pad("p-value", 12) << "PII rank\n";
  for (const auto& in : report.inputs)
    out << pad(in.name, 14) << pad(fmt("%.4f", in.r2_hsic), 12) << pad(fmt("%.4f", in.p_value), 12)
        << (in.selected ? std::to_string(in.rank) : "-") << "\n";
  return out.str();
}

std::string build_table(const BuildTrace& trace) {
  std::ostringstream out;
  out << "Sequential joint GP build\n";
  out << pad("step", 6) << pad("added", 14) << pad("LOO Q2", 10) << "NLL\n";
  int k = 1;
  for (const auto& s : trace.steps)
    out << pad(std::to_string(k++), 6) << pad(s.name, 14) << pad(fmt("%.4f", s.loo_q2), 10) << fmt("%.4f", s.nll)
        << "\n";
  return out.str();
}

std::string sobol_table(const SobolReport& report) {
  std::ostringstream out;
  out << "Sobol' indices through the joint metamodel (N = " << report.mc_size << ")\n";
  out << pad("input", 14) << pad("first", 10) << pad("(se)", 10) << pad("total|exp", 12) << "(se)\n";
  for (std::size_t k = 0; k < report.first.size(); ++k) {
    const auto& f = report.first[k];
    const auto& t = report.total_pii[k];
    out << pad(f.name, 14) << pad(fmt("%.4f", clamp_index(f.value.estimate)), 10)
        << pad(fmt("%.4f", f.value.std_error), 10) << pad(fmt("%.4f", clamp_index(t.value.estimate)), 12)
        << fmt("%.4f", t.value.std_error) << "\n";
  }
  if (!report.second.empty()) {
    out << "interactions\n";
    auto name_of = [&](int input) {
      for (const auto& f : report.first)
        if (f.input == input) return f.name;
      return std::to_string(input);
    };
    for (const auto& p : report.second)
      out << pad(name_of(p.first) + " x " + name_of(p.second), 24) << pad(fmt("%.4f", clamp_index(p.value.estimate)), 10)
          << fmt("%.4f", p.value.std_error) << "\n";
  }
  out << pad("X_eps total", 14) << pad(fmt("%.4f", clamp_index(report.s_t_eps.estimate)), 10)
      << fmt("%.4f", report.s_t_eps.std_error) << "\n";
  out << "Var(Y): empirical " << fmt("%.6g", report.var_y_empirical) << ", metamodel "
      << fmt("%.6g", report.decomposition.var_y) << " = " << fmt("%.6g", report.decomposition.var_mean_component)
      << " + " << fmt("%.6g", report.decomposition.mean_dispersion_component) << "\n";
  return out.str();
}

std::string quantile_table(const QuantileReport& report) {
  std::ostringstream out;
  out << fmt("%.4g", 100.0 * report.p) << "% quantile estimates (CI level " << fmt("%.3g", report.level) << ")\n";
  out << pad("method", 24) << pad("estimate", 14) << "interval\n";
  for (const auto& e : report.estimates) {
    out << pad(e.method, 24) << pad(fmt("%.6g", e.estimate), 14);
    if (e.ci)
      out << "[" << fmt("%.6g", e.ci->first) << ", " << fmt("%.6g", e.ci->second) << "]";
    else
      out << "-";
    out << "\n";
  }
  return out.str();
}

}  // namespace uqpipe

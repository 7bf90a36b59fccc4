#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "uqpipe/bench.hpp"
#include "uqpipe/design.hpp"
#include "uqpipe/errors.hpp"
#include "uqpipe/joint_gp.hpp"
#include "uqpipe/pipeline.hpp"
#include "uqpipe/quantile.hpp"
#include "uqpipe/report.hpp"
#include "uqpipe/screening.hpp"
#include "uqpipe/version.hpp"

namespace py = pybind11;
using namespace uqpipe;

namespace {

// JSON crosses the boundary as text; the Python package decodes it.
using Text = std::string;

LearningSample make_sample(const Matrix& x, const Vector& y, std::vector<std::string> names) {
  if (names.empty())
    for (Eigen::Index k = 0; k < x.cols(); ++k) names.push_back("X" + std::to_string(k + 1));
  if (static_cast<Eigen::Index>(names.size()) != x.cols()) throw DataError("names must match the columns of x");
  if (x.rows() != y.size()) throw DataError("x and y must have the same number of rows");
  return {std::move(names), x, y};
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "uqpipe native core";
  m.attr("__version__") = kVersion;

  auto base = py::register_exception<Error>(m, "UqpipeError", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<DataError>(m, "DataError", base.ptr());
  py::register_exception<NumericalError>(m, "NumericalError", base.ptr());

  m.def("bench_names", &bench::bench_names);
  m.def("bench_space", [](const std::string& name) -> Text { return to_json(bench::make_bench(name).space).dump(); });
  m.def("bench_evaluate", [](const std::string& name, const Matrix& x) {
    const auto f = bench::make_bench(name);
    if (x.cols() != f.space.dimension()) throw DataError(name + " takes " + std::to_string(f.space.dimension()) + " inputs");
    return f.evaluate_rows(x);
  }, py::arg("name"), py::arg("x"));
  m.def("bench_sample", [](const std::string& name, int n, std::uint64_t seed) {
    return bench::make_bench(name).space.sample(n, seed);
  }, py::arg("name"), py::arg("n"), py::arg("seed") = 1);

  m.def("lhs", [](int n, int d, std::uint64_t seed) { return lhs(n, d, seed).unit_points; }, py::arg("n"), py::arg("d"),
        py::arg("seed") = 1);
  m.def("optimize_lhs", [](const Matrix& unit_points, int iterations, std::uint64_t seed) {
    DesignMatrix d;
    d.unit_points = unit_points;
    return optimize_lhs(d, iterations, seed).unit_points;
  }, py::arg("unit_points"), py::arg("iterations") = 10000, py::arg("seed") = 1);
  m.def("centered_l2_discrepancy", &centered_l2_discrepancy);

  m.def("hsic", [](const Vector& x, const Vector& y) { return hsic(x, y); });
  m.def("r2_hsic", [](const Vector& x, const Vector& y) { return r2_hsic(x, y); });
  m.def("permutation_test", [](const Vector& x, const Vector& y, int permutations, std::uint64_t seed) {
    return permutation_test(x, y, {}, permutations, seed);
  });
  m.def("gamma_test", [](const Vector& x, const Vector& y) { return gamma_test(x, y); });
  m.def(
      "screen",
      [](const Matrix& x, const Vector& y, std::vector<std::string> names, double alpha, const std::string& method,
         int permutations, std::uint64_t seed) -> Text {
        ScreeningOptions o;
        o.alpha = alpha;
        o.method = parse_test_method(method);
        o.permutations = permutations;
        return to_json(screen(make_sample(x, y, std::move(names)), o, seed)).dump();
      },
      py::arg("x"), py::arg("y"), py::arg("names") = std::vector<std::string>{}, py::arg("alpha") = 0.1,
      py::arg("method") = "permutation", py::arg("permutations") = 1000, py::arg("seed") = 1);

  py::class_<JointGpModel>(m, "JointModel")
      .def_property_readonly("pii", &JointGpModel::pii)
      .def_property_readonly("eps_group", &JointGpModel::eps_group)
      .def_property_readonly("dispersion_floor", &JointGpModel::dispersion_floor)
      .def("predict", [](const JointGpModel& j, const Matrix& x) {
        const PredictResult r = j.predict_mean_full(x);
        return py::make_tuple(r.mean, r.variance, j.predict_dispersion_full(x));
      })
      .def("to_json", [](const JointGpModel& j) -> Text { return j.to_json().dump(); })
      .def_static("from_json", [](const Text& s) { return JointGpModel::from_json(nlohmann::json::parse(s)); });

  m.def(
      "build_joint",
      [](const Matrix& x, const Vector& y, const IndexList& pii, std::vector<std::string> names, int restarts,
         std::uint64_t seed) {
        JointGpConfig cfg;
        cfg.fit.restarts = restarts;
        JointBuild b = build_joint(make_sample(x, y, std::move(names)), pii, cfg, seed);
        return py::make_tuple(std::move(b.model), Text(to_json(b.trace).dump()));
      },
      py::arg("x"), py::arg("y"), py::arg("pii"), py::arg("names") = std::vector<std::string>{},
      py::arg("restarts") = 5, py::arg("seed") = 1);

  m.def("empirical_quantile", &empirical_quantile);

  m.def(
      "run_pipeline",
      [](const Text& config, const std::filesystem::path& out_dir, std::vector<std::string> stages,
         std::optional<std::uint64_t> seed) -> Text {
        RunConfig cfg = config_from_json(nlohmann::json::parse(config));
        if (seed) cfg.seed = *seed;
        PipelineOptions o;
        o.out_dir = out_dir;
        o.stages = std::move(stages);
        py::gil_scoped_release release;
        return run_pipeline(cfg, o).dump();
      },
      py::arg("config"), py::arg("out_dir"), py::arg("stages") = std::vector<std::string>{},
      py::arg("seed") = py::none());
}

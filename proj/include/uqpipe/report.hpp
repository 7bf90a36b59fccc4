#pragma once

#include <string>

#include "json.hpp"
#include "uqpipe/input_space.hpp"
#include "uqpipe/joint_gp.hpp"
#include "uqpipe/quantile.hpp"
#include "uqpipe/screening.hpp"
#include "uqpipe/sensitivity.hpp"
#include "uqpipe/validation.hpp"

namespace uqpipe {

using json = nlohmann::json;

json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const json& j);

json to_json(const Marginal& m);
Marginal marginal_from_json(const json& j);
json to_json(const InputSpace& space);
InputSpace input_space_from_json(const json& j);

json to_json(const ScreeningReport& report);
ScreeningReport screening_from_json(const json& j);

json to_json(const BuildTrace& trace);
BuildTrace build_trace_from_json(const json& j);

json to_json(const CoverageCurve& curve);
CoverageCurve coverage_from_json(const json& j);

json to_json(const SobolReport& report);
SobolReport sobol_from_json(const json& j);

json to_json(const QuantileReport& report);
QuantileReport quantile_from_json(const json& j);

/// Fixed-width text tables.
std::string screening_table(const ScreeningReport& report);
std::string build_table(const BuildTrace& trace);
std::string sobol_table(const SobolReport& report);
std::string quantile_table(const QuantileReport& report);

}  // namespace uqpipe

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "uqpipe/design.hpp"
#include "uqpipe/input_space.hpp"
#include "uqpipe/types.hpp"

namespace uqpipe {

/// Numeric table with a header row.
struct CsvTable {
  std::vector<std::string> header;
  Matrix values;

  int column(const std::string& name) const;  // -1 when absent
};

/// Strict reader: comma-separated, header row, every cell a finite number.
/// Errors name the offending row (1-based, header excluded) and column.
CsvTable read_csv(const std::filesystem::path& path);

/// Writes with LF endings and 17 significant digits.
void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header, const Matrix& values);

/// %.17g formatting; parses back to exactly `value`.
std::string format_double(double value);

/// Reads X from `x_path`, Y either from the file `y_source` (one column) or
/// from the column of that name in the X file. When `space` is given the X
/// header must list its input names in order.
LearningSample ingest_sample(const std::filesystem::path& x_path, const std::string& y_source,
                             const InputSpace* space = nullptr);

/// Writes X columns followed by a `y_name` column.
void write_sample(const std::filesystem::path& path, const LearningSample& sample, const std::string& y_name = "Y");

/// Physical design points for an external simulator, one column per input.
void export_design_for_simulator(const DesignMatrix& design, const InputSpace& space,
                                 const std::filesystem::path& path);

/// Outputs returned by the simulator for an exported design; the row count
/// must match the design.
Vector read_simulator_outputs(const std::filesystem::path& path, int expected_rows);

}  // namespace uqpipe

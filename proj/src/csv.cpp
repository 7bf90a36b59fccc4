#include "uqpipe/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "uqpipe/errors.hpp"

namespace uqpipe {

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

bool parse_number(const std::string& token, double& out) {
  const char* first = token.data();
  const char* last = token.data() + token.size();
  if (first != last && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last && first != last;
}

void check_name(const std::string& name) {
  if (name.empty() || name.find_first_of(",\"\n\r") != std::string::npos)
    throw DataError("column name '" + name + "' cannot be written to CSV");
}

}  // namespace

int CsvTable::column(const std::string& name) const {
  for (std::size_t c = 0; c < header.size(); ++c)
    if (header[c] == name) return static_cast<int>(c);
  return -1;
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line)) throw DataError(path.string() + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);

  CsvTable table;
  for (auto& h : split(line)) table.header.push_back(trim(h));
  const auto d = table.header.size();
  for (const auto& h : table.header)
    if (h.empty()) throw DataError(path.string() + ": empty column name in header");

  std::vector<double> cells;
  int row = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    ++row;
    const auto tokens = split(line);
    if (tokens.size() != d)
      throw DataError(path.string() + ": row " + std::to_string(row) + " has " + std::to_string(tokens.size()) +
                      " fields, header has " + std::to_string(d));
    for (std::size_t c = 0; c < d; ++c) {
      const std::string token = trim(tokens[c]);
      double v = 0.0;
      const std::string where = path.string() + ": row " + std::to_string(row) + ", column " +
                                std::to_string(c + 1) + " ('" + table.header[c] + "')";
      if (!parse_number(token, v)) throw DataError(where + ": not a number: '" + token + "'");
      if (!std::isfinite(v)) throw DataError(where + ": non-finite value");
      cells.push_back(v);
    }
  }
  table.values.resize(row, static_cast<Eigen::Index>(d));
  for (int r = 0; r < row; ++r)
    for (std::size_t c = 0; c < d; ++c)
      table.values(r, static_cast<Eigen::Index>(c)) = cells[static_cast<std::size_t>(r) * d + c];
  return table;
}

std::string format_double(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value, std::chars_format::general, 17);
  if (ec != std::errc()) throw DataError("cannot format number");
  return std::string(buf, ptr);
}

void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header, const Matrix& values) {
  if (static_cast<Eigen::Index>(header.size()) != values.cols())
    throw DataError("write_csv: header and column count differ");
  for (const auto& h : header) check_name(h);
  std::ostringstream out;
  for (std::size_t c = 0; c < header.size(); ++c) out << (c ? "," : "") << header[c];
  out << '\n';
  for (Eigen::Index r = 0; r < values.rows(); ++r) {
    for (Eigen::Index c = 0; c < values.cols(); ++c) {
      if (!std::isfinite(values(r, c))) throw DataError("write_csv: non-finite value");
      out << (c ? "," : "") << format_double(values(r, c));
    }
    out << '\n';
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw DataError("cannot write '" + path.string() + "'");
  file << out.str();
  if (!file) throw DataError("write failed for '" + path.string() + "'");
}

LearningSample ingest_sample(const std::filesystem::path& x_path, const std::string& y_source,
                             const InputSpace* space) {
  CsvTable xt = read_csv(x_path);
  LearningSample sample;
  const int y_col = xt.column(y_source);
  if (y_col >= 0) {
    sample.y = xt.values.col(y_col);
    Matrix x(xt.values.rows(), xt.values.cols() - 1);
    int k = 0;
    for (int c = 0; c < static_cast<int>(xt.header.size()); ++c) {
      if (c == y_col) continue;
      x.col(k++) = xt.values.col(c);
      sample.names.push_back(xt.header[static_cast<std::size_t>(c)]);
    }
    sample.x = std::move(x);
  } else {
    const std::filesystem::path y_path =
        std::filesystem::path(y_source).is_relative() && !std::filesystem::exists(y_source)
            ? x_path.parent_path() / y_source
            : std::filesystem::path(y_source);
    if (!std::filesystem::exists(y_path))
      throw DataError("'" + y_source + "' is neither a column of '" + x_path.string() + "' nor a readable file");
    CsvTable yt = read_csv(y_path);
    if (yt.values.cols() != 1) throw DataError(y_path.string() + ": expected a single output column");
    if (yt.values.rows() != xt.values.rows())
      throw DataError("output rows (" + std::to_string(yt.values.rows()) + ") differ from input rows (" +
                      std::to_string(xt.values.rows()) + ")");
    sample.x = std::move(xt.values);
    sample.y = yt.values.col(0);
    sample.names = std::move(xt.header);
  }
  if (sample.y.size() == 0) throw DataError(x_path.string() + ": no data rows");
  if (space) {
    if (sample.names != space->names()) {
      std::string expected;
      for (const auto& n : space->names()) expected += (expected.empty() ? "" : ",") + n;
      throw DataError(x_path.string() + ": header does not match the input space (expected " + expected + ")");
    }
  }
  return sample;
}

void write_sample(const std::filesystem::path& path, const LearningSample& sample, const std::string& y_name) {
  std::vector<std::string> header = sample.names;
  header.push_back(y_name);
  Matrix values(sample.x.rows(), sample.x.cols() + 1);
  values << sample.x, sample.y;
  write_csv(path, header, values);
}

void export_design_for_simulator(const DesignMatrix& design, const InputSpace& space,
                                 const std::filesystem::path& path) {
  const Matrix physical =
      design.physical_points.size() ? design.physical_points : space.transform(design.unit_points);
  if (physical.cols() != space.dimension()) throw DataError("design dimension does not match the input space");
  write_csv(path, space.names(), physical);
}

Vector read_simulator_outputs(const std::filesystem::path& path, int expected_rows) {
  const CsvTable t = read_csv(path);
  if (t.values.cols() != 1) throw DataError(path.string() + ": expected a single output column");
  if (t.values.rows() != expected_rows)
    throw DataError(path.string() + ": " + std::to_string(t.values.rows()) + " output rows for a design of " +
                    std::to_string(expected_rows) + " points");
  return t.values.col(0);
}

}  // namespace uqpipe

#include "ogmm/simgen/csv.hpp"

#include "ogmm/errors.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

namespace ogmm::simgen {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma == std::string::npos ? std::string::npos : comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace

void write_csv(std::ostream& out, const std::vector<std::string>& columns, const MatrixCRef& data) {
  if (static_cast<Index>(columns.size()) != data.cols())
    throw DimensionError("write_csv: header and data widths differ");
  for (std::size_t j = 0; j < columns.size(); ++j) out << (j ? "," : "") << columns[j];
  out << '\n';
  for (Index i = 0; i < data.rows(); ++i) {
    for (Index j = 0; j < data.cols(); ++j) out << (j ? "," : "") << format_double(data(i, j));
    out << '\n';
  }
}

CsvTable read_csv(std::istream& in) {
  CsvTable table;
  std::vector<double> values;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    auto fields = split(t);
    if (!have_header) {
      for (const auto& f : fields)
        if (f.empty()) throw FormatError("line " + std::to_string(line_no) + ": empty column name");
      table.columns = std::move(fields);
      have_header = true;
      continue;
    }
    if (fields.size() != table.columns.size())
      throw FormatError("line " + std::to_string(line_no) + ": expected " + std::to_string(table.columns.size()) +
                        " fields, found " + std::to_string(fields.size()));
    for (std::size_t j = 0; j < fields.size(); ++j) {
      const std::string& f = fields[j];
      double v = 0.0;
      const auto res = std::from_chars(f.data(), f.data() + f.size(), v);
      if (f.empty() || res.ec != std::errc() || res.ptr != f.data() + f.size() || !std::isfinite(v))
        throw FormatError("line " + std::to_string(line_no) + ", column " + table.columns[j] +
                          ": not a finite number: '" + f + "'");
      values.push_back(v);
    }
  }
  if (!have_header) throw FormatError("csv input has no header line");
  const Index cols = static_cast<Index>(table.columns.size());
  const Index rows = static_cast<Index>(values.size()) / cols;
  table.data = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      values.data(), rows, cols);
  return table;
}

CsvTable read_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path);
  return read_csv(in);
}

}  // namespace ogmm::simgen

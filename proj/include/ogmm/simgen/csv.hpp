#pragma once

#include "ogmm/types.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace ogmm::simgen {

/// Numeric table with a header row.
struct CsvTable {
  std::vector<std::string> columns;
  Matrix data;
};

/// Writes a header line and one line per row with round-trip precision.
void write_csv(std::ostream& out, const std::vector<std::string>& columns, const MatrixCRef& data);

/// Reads a comma-separated numeric table whose first non-blank line is the
/// header. Blank lines and lines starting with '#' are skipped. Throws
/// FormatError naming the offending line for wrong field counts or
/// unparsable or non-finite numbers.
CsvTable read_csv(std::istream& in);
CsvTable read_csv_file(const std::string& path);

}  // namespace ogmm::simgen

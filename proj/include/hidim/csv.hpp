#pragma once

#include <iosfwd>
#include <string>

#include "hidim/data.hpp"

namespace hidim {

// Comma-separated reals, one observation per line. Blank lines are skipped.
Matrix read_csv_matrix(std::istream& in, bool has_header = false);
Matrix read_csv_file(const std::string& path, bool has_header = false);

void write_csv_matrix(std::ostream& out, const Matrix& values);

}  // namespace hidim

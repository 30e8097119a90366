#pragma once

#include <string>
#include <vector>

namespace extr::csv {

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;  // cells, trimmed, unquoted
};

// Comma-separated, one header row, UTF-8 (a leading BOM is stripped), "." as
// decimal point, no quoting or embedded commas. Empty cells are kept as empty
// strings; callers decide whether that is an error.
Table read_table(const std::string& path);

// Strict double parse of a full cell. Returns false if any trailing garbage
// remains or the cell is empty/non-numeric.
bool parse_double(const std::string& cell, double& out);

// Shortest representation that round-trips to the same double.
std::string format_double(double v);

// Atomic write: contents go to a temp file in the same directory, then rename.
void write_file_atomic(const std::string& path, const std::string& contents);

}  // namespace extr::csv

#pragma once

#include <istream>
#include <string>
#include <string_view>
#include <vector>

namespace mrinv::csv {

/// Splits one record. Fields may be double-quoted with "" as an escaped quote.
std::vector<std::string> split_line(std::string_view line);

/// Reads all non-empty records; a trailing '\r' on each line is dropped.
std::vector<std::vector<std::string>> read_all(std::istream& in);

/// Quotes the field only when it contains a comma, quote or newline.
std::string escape(std::string_view field);

}  // namespace mrinv::csv

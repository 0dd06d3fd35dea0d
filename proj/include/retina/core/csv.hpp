#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace retina::csv {

using Row = std::vector<std::string>;

/// Splits unquoted comma-separated text into rows. Accepts LF or CRLF line
/// endings and skips blank lines. Quoting is not supported; a field
/// containing '"' is rejected with std::invalid_argument.
std::vector<Row> parse(std::string_view text);

/// Joins rows with ',' and '\n'. Fields must not contain ',', '"' or newlines.
std::string format(const std::vector<Row>& rows);

}  // namespace retina::csv

#include "retina/core/csv.hpp"

#include <stdexcept>

namespace retina::csv {

std::vector<Row> parse(std::string_view text) {
  std::vector<Row> rows;
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    auto eol = text.find('\n');
    std::string_view line = text.substr(0, eol);
    text = eol == std::string_view::npos ? std::string_view{} : text.substr(eol + 1);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    if (line.find('"') != std::string_view::npos)
      throw std::invalid_argument("line " + std::to_string(line_no) + ": quoted fields are not supported");
    Row row;
    std::size_t start = 0;
    for (;;) {
      const auto comma = line.find(',', start);
      row.emplace_back(line.substr(start, comma - start));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string format(const std::vector<Row>& rows) {
  std::string out;
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (row[i].find_first_of(",\"\r\n") != std::string::npos)
        throw std::invalid_argument("field cannot be written as plain CSV: " + row[i]);
      if (i) out.push_back(',');
      out += row[i];
    }
    out.push_back('\n');
  }
  return out;
}

}  // namespace retina::csv

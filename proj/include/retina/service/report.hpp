#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "retina/core/bytes.hpp"
#include "retina/service/records.hpp"

namespace retina::service {

struct ReportDocument {
  UserAccount patient;
  std::optional<std::int64_t> start_day, end_day;
  std::vector<PredictionRecord> records;  // timestamp descending
  std::int64_t generated_at = 0;
};

/// Text-only PDF 1.4 in Helvetica. Output depends only on the document,
/// so identical inputs give identical bytes.
Bytes render_pdf(const ReportDocument& doc);
nlohmann::json to_json(const ReportDocument& doc);

}  // namespace retina::service

#include "retina/dataset/manifest.hpp"

#include <charconv>

#include "retina/core/bytes.hpp"
#include "retina/core/csv.hpp"

namespace retina::dataset {

const char* to_string(DatasetErrc code) {
  switch (code) {
    case DatasetErrc::ParseError: return "ParseError";
    case DatasetErrc::DuplicateId: return "DuplicateId";
    case DatasetErrc::UnknownLabel: return "UnknownLabel";
    case DatasetErrc::EmptyManifest: return "EmptyManifest";
    case DatasetErrc::TargetBelowOriginal: return "TargetBelowOriginal";
    case DatasetErrc::MissingSource: return "MissingSource";
    case DatasetErrc::WriteFailure: return "WriteFailure";
    case DatasetErrc::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

void DatasetManifest::add(ManifestEntry entry) {
  if (entry.image_id.empty()) throw DatasetError(DatasetErrc::ParseError, "empty image_id");
  if (contains(entry.image_id)) throw DatasetError(DatasetErrc::DuplicateId, "duplicate image_id '" + entry.image_id + "'");
  if (entry.source_id) {
    auto it = index_.find(*entry.source_id);
    if (it == index_.end() || entries_[it->second].synthetic())
      throw DatasetError(DatasetErrc::MissingSource,
                         "synthetic entry '" + entry.image_id + "' references unknown original '" + *entry.source_id + "'");
  }
  index_.emplace(entry.image_id, entries_.size());
  entries_.push_back(std::move(entry));
}

const ManifestEntry& DatasetManifest::at(std::string_view id) const {
  auto it = index_.find(std::string(id));
  if (it == index_.end()) throw DatasetError(DatasetErrc::MissingSource, "no entry '" + std::string(id) + "'");
  return entries_[it->second];
}

std::vector<const ManifestEntry*> DatasetManifest::originals() const {
  std::vector<const ManifestEntry*> out;
  for (const auto& e : entries_)
    if (!e.synthetic()) out.push_back(&e);
  return out;
}

ClassCounts DatasetManifest::class_counts(bool originals_only) const {
  ClassCounts counts{};
  for (const auto& e : entries_)
    if (!originals_only || !e.synthetic()) ++counts[static_cast<std::size_t>(ordinal(e.label))];
  return counts;
}

namespace {

constexpr std::string_view kHeader[] = {"image_id", "path", "label", "provenance", "source_id", "op"};

}  // namespace

DatasetManifest parse_manifest(std::string_view csv_text) {
  std::vector<csv::Row> rows;
  try {
    rows = csv::parse(csv_text);
  } catch (const std::invalid_argument& e) {
    throw DatasetError(DatasetErrc::ParseError, e.what());
  }
  if (rows.empty()) throw DatasetError(DatasetErrc::ParseError, "manifest has no header");
  const auto& header = rows.front();
  // The provenance columns are optional for originals-only manifests.
  if (header.size() != 6 && header.size() != 3) throw DatasetError(DatasetErrc::ParseError, "unexpected manifest header");
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] != kHeader[i]) throw DatasetError(DatasetErrc::ParseError, "unexpected manifest column '" + header[i] + "'");

  DatasetManifest manifest;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    const std::string where = "manifest row " + std::to_string(r + 1);
    if (row.size() != header.size()) throw DatasetError(DatasetErrc::ParseError, where + ": wrong field count");
    ManifestEntry e;
    e.image_id = row[0];
    e.path = row[1];
    long label = -1;
    auto [p, ec] = std::from_chars(row[2].data(), row[2].data() + row[2].size(), label);
    if (ec != std::errc() || p != row[2].data() + row[2].size())
      throw DatasetError(DatasetErrc::ParseError, where + ": label is not an integer");
    auto severity = severity_from_ordinal(label);
    if (!severity) throw DatasetError(DatasetErrc::UnknownLabel, where + ": label " + row[2] + " outside 0..4");
    e.label = *severity;
    if (header.size() == 6) {
      if (row[3] == "syn") {
        e.source_id = row[4];
        try {
          e.op = imaging::parse_op(row[5]);
        } catch (const imaging::ImageError& err) {
          throw DatasetError(DatasetErrc::ParseError, where + ": " + err.what());
        }
      } else if (row[3] != "orig" || !row[4].empty() || !row[5].empty()) {
        throw DatasetError(DatasetErrc::ParseError, where + ": bad provenance columns");
      }
    }
    manifest.add(std::move(e));
  }
  return manifest;
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  Bytes raw;
  try {
    raw = read_file(path);
  } catch (const std::exception& e) {
    throw DatasetError(DatasetErrc::ParseError, e.what());
  }
  return parse_manifest(std::string_view(reinterpret_cast<const char*>(raw.data()), raw.size()));
}

std::string format_manifest(const DatasetManifest& manifest) {
  std::vector<csv::Row> rows;
  rows.emplace_back(std::begin(kHeader), std::end(kHeader));
  for (const auto& e : manifest.entries()) {
    rows.push_back({e.image_id, e.path, std::to_string(ordinal(e.label)), e.synthetic() ? "syn" : "orig",
                    e.source_id.value_or(""), e.op ? imaging::format_op(*e.op) : ""});
  }
  return csv::format(rows);
}

void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
  try {
    write_file(path, format_manifest(manifest));
  } catch (const std::exception& e) {
    throw DatasetError(DatasetErrc::WriteFailure, e.what());
  }
}

}  // namespace retina::dataset

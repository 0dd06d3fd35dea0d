#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "retina/core/error.hpp"
#include "retina/core/severity.hpp"
#include "retina/imaging/augment.hpp"

namespace retina::dataset {

enum class DatasetErrc {
  ParseError,
  DuplicateId,
  UnknownLabel,
  EmptyManifest,
  TargetBelowOriginal,
  MissingSource,
  WriteFailure,
  InvalidArgument,
};

const char* to_string(DatasetErrc code);

using DatasetError = CodedError<DatasetErrc>;

using ClassCounts = std::array<std::size_t, kSeverityCount>;

struct ManifestEntry {
  std::string image_id;
  std::string path;
  Severity label = Severity::NoDR;
  /// Set for synthetic entries: the original it was derived from and how.
  std::optional<std::string> source_id;
  std::optional<imaging::AugmentOp> op;

  bool synthetic() const { return source_id.has_value(); }
  bool operator==(const ManifestEntry&) const = default;
};

/// Labeled image inventory. Ids are unique; synthetic entries must point
/// at an original entry of the same manifest.
class DatasetManifest {
 public:
  DatasetManifest() = default;

  /// Throws DuplicateId, or MissingSource for a synthetic entry whose source
  /// is absent or itself synthetic.
  void add(ManifestEntry entry);

  const std::vector<ManifestEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool contains(std::string_view id) const { return index_.count(std::string(id)) > 0; }
  const ManifestEntry& at(std::string_view id) const;

  std::vector<const ManifestEntry*> originals() const;
  ClassCounts class_counts(bool originals_only = true) const;

  bool operator==(const DatasetManifest& other) const { return entries_ == other.entries_; }

 private:
  std::vector<ManifestEntry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// CSV header: image_id,path,label,provenance,source_id,op
DatasetManifest parse_manifest(std::string_view csv_text);
DatasetManifest load_manifest(const std::filesystem::path& path);
std::string format_manifest(const DatasetManifest& manifest);
void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

}  // namespace retina::dataset

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "retina/dataset/manifest.hpp"

namespace retina::dataset {

enum class Partition { Train, Validation, Test };

std::string_view to_string(Partition p);

struct SplitFractions {
  double train = 0.70;
  double validation = 0.15;
  double test = 0.15;
};

struct PartitionSizes {
  std::size_t train = 0;
  std::size_t validation = 0;
  std::size_t test = 0;
  bool operator==(const PartitionSizes&) const = default;
};

/// floor(train * n), floor(validation * n), remainder to test.
PartitionSizes split_sizes(std::size_t n, const SplitFractions& fractions);

/// Partition of the original entries of a manifest.
struct SplitAssignment {
  std::uint64_t seed = 0;
  std::map<std::string, Partition> partition;

  std::vector<std::string> ids(Partition p) const;
  bool operator==(const SplitAssignment&) const = default;
};

/// Per class (manifest order), shuffle with the seed and cut by
/// split_sizes. Synthetic entries are not partitioned; see
/// `partition_members`.
SplitAssignment stratified_split(const DatasetManifest& manifest, const SplitFractions& fractions,
                                 std::uint64_t seed);

/// Entries belonging to a partition. Synthetic entries whose source is in
/// Train join the Train partition and are never returned for Validation or
/// Test.
std::vector<const ManifestEntry*> partition_members(const DatasetManifest& manifest, const SplitAssignment& split,
                                                    Partition p);

struct FoldAssignment {
  int k = 5;
  std::uint64_t seed = 0;
  std::map<std::string, int> fold;

  std::vector<std::string> ids(int f) const;
  bool operator==(const FoldAssignment&) const = default;
};

/// Stratified k-fold assignment. Within each class (input order), items
/// are shuffled and dealt round-robin starting where the previous class
/// stopped, so per-class fold sizes differ by at most one.
FoldAssignment assign_folds(const std::vector<std::string>& ids, const std::vector<Severity>& labels, int k,
                            std::uint64_t seed);

std::string format_split(const SplitAssignment& split);
SplitAssignment parse_split(std::string_view csv_text);
std::string format_folds(const FoldAssignment& folds);
FoldAssignment parse_folds(std::string_view csv_text);

}  // namespace retina::dataset

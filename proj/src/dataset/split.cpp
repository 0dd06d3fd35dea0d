#include "retina/dataset/split.hpp"

#include <charconv>
#include <cmath>

#include "retina/core/csv.hpp"
#include "retina/core/rng.hpp"

namespace retina::dataset {

std::string_view to_string(Partition p) {
  switch (p) {
    case Partition::Train: return "train";
    case Partition::Validation: return "validation";
    case Partition::Test: return "test";
  }
  return "unknown";
}

PartitionSizes split_sizes(std::size_t n, const SplitFractions& f) {
  if (f.train < 0 || f.validation < 0 || f.test < 0 || std::abs(f.train + f.validation + f.test - 1.0) > 1e-9)
    throw DatasetError(DatasetErrc::InvalidArgument, "split fractions must be non-negative and sum to 1");
  // The epsilon absorbs representation error such as 0.7 * 20 = 13.999...
  const auto train = static_cast<std::size_t>(std::floor(f.train * static_cast<double>(n) + 1e-9));
  const auto val = static_cast<std::size_t>(std::floor(f.validation * static_cast<double>(n) + 1e-9));
  return {train, val, n - train - val};
}

std::vector<std::string> SplitAssignment::ids(Partition p) const {
  std::vector<std::string> out;
  for (const auto& [id, part] : partition)
    if (part == p) out.push_back(id);
  return out;
}

namespace {

template <class T>
void shuffle(std::vector<T>& items, Rng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.uniform_int(i));
    std::swap(items[i - 1], items[j]);
  }
}

}  // namespace

SplitAssignment stratified_split(const DatasetManifest& manifest, const SplitFractions& fractions,
                                 std::uint64_t seed) {
  const auto originals = manifest.originals();
  if (originals.empty()) throw DatasetError(DatasetErrc::EmptyManifest, "manifest has no original entries");
  SplitAssignment split;
  split.seed = seed;
  for (auto cls : kAllSeverities) {
    std::vector<std::string> members;
    for (const auto* e : originals)
      if (e->label == cls) members.push_back(e->image_id);
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(ordinal(cls))));
    shuffle(members, rng);
    const auto sizes = split_sizes(members.size(), fractions);
    for (std::size_t i = 0; i < members.size(); ++i) {
      const Partition p = i < sizes.train                    ? Partition::Train
                          : i < sizes.train + sizes.validation ? Partition::Validation
                                                               : Partition::Test;
      split.partition.emplace(members[i], p);
    }
  }
  return split;
}

std::vector<const ManifestEntry*> partition_members(const DatasetManifest& manifest, const SplitAssignment& split,
                                                    Partition p) {
  std::vector<const ManifestEntry*> out;
  for (const auto& e : manifest.entries()) {
    const std::string& key = e.synthetic() ? *e.source_id : e.image_id;
    auto it = split.partition.find(key);
    if (it == split.partition.end()) continue;
    if (e.synthetic() && p != Partition::Train) continue;
    if (it->second == p) out.push_back(&e);
  }
  return out;
}

std::vector<std::string> FoldAssignment::ids(int f) const {
  std::vector<std::string> out;
  for (const auto& [id, fi] : fold)
    if (fi == f) out.push_back(id);
  return out;
}

FoldAssignment assign_folds(const std::vector<std::string>& ids, const std::vector<Severity>& labels, int k,
                            std::uint64_t seed) {
  if (k < 2) throw DatasetError(DatasetErrc::InvalidArgument, "fold count must be >= 2");
  if (ids.size() != labels.size()) throw DatasetError(DatasetErrc::InvalidArgument, "ids and labels differ in length");
  FoldAssignment folds;
  folds.k = k;
  folds.seed = seed;
  std::size_t next = 0;
  for (auto cls : kAllSeverities) {
    std::vector<std::string> members;
    for (std::size_t i = 0; i < ids.size(); ++i)
      if (labels[i] == cls) members.push_back(ids[i]);
    Rng rng(derive_seed(seed, 100 + static_cast<std::uint64_t>(ordinal(cls))));
    shuffle(members, rng);
    for (const auto& id : members) {
      if (!folds.fold.emplace(id, static_cast<int>(next % static_cast<std::size_t>(k))).second)
        throw DatasetError(DatasetErrc::DuplicateId, "duplicate id '" + id + "' in fold input");
      ++next;
    }
  }
  return folds;
}

std::string format_split(const SplitAssignment& split) {
  std::vector<csv::Row> rows{{"image_id", "partition"}};
  for (const auto& [id, p] : split.partition) rows.push_back({id, std::string(to_string(p))});
  return csv::format(rows);
}

SplitAssignment parse_split(std::string_view text) {
  const auto rows = csv::parse(text);
  if (rows.empty() || rows[0] != csv::Row{"image_id", "partition"})
    throw DatasetError(DatasetErrc::ParseError, "unexpected split header");
  SplitAssignment split;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].size() != 2) throw DatasetError(DatasetErrc::ParseError, "split row has wrong field count");
    Partition p;
    if (rows[r][1] == "train") p = Partition::Train;
    else if (rows[r][1] == "validation") p = Partition::Validation;
    else if (rows[r][1] == "test") p = Partition::Test;
    else throw DatasetError(DatasetErrc::ParseError, "unknown partition '" + rows[r][1] + "'");
    if (!split.partition.emplace(rows[r][0], p).second)
      throw DatasetError(DatasetErrc::DuplicateId, "duplicate id in split file");
  }
  return split;
}

std::string format_folds(const FoldAssignment& folds) {
  std::vector<csv::Row> rows{{"image_id", "fold"}};
  for (const auto& [id, f] : folds.fold) rows.push_back({id, std::to_string(f)});
  return csv::format(rows);
}

FoldAssignment parse_folds(std::string_view text) {
  const auto rows = csv::parse(text);
  if (rows.empty() || rows[0] != csv::Row{"image_id", "fold"})
    throw DatasetError(DatasetErrc::ParseError, "unexpected fold header");
  FoldAssignment folds;
  int max_fold = -1;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].size() != 2) throw DatasetError(DatasetErrc::ParseError, "fold row has wrong field count");
    int f = -1;
    const auto& s = rows[r][1];
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), f);
    if (ec != std::errc() || p != s.data() + s.size() || f < 0)
      throw DatasetError(DatasetErrc::ParseError, "bad fold index '" + s + "'");
    folds.fold.emplace(rows[r][0], f);
    max_fold = std::max(max_fold, f);
  }
  folds.k = std::max(2, max_fold + 1);
  return folds;
}

}  // namespace retina::dataset

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "retina/dataset/manifest.hpp"
#include "retina/imaging/image.hpp"

namespace retina::dataset {

/// Augmentation kinds allowed per grade. No_DR is never augmented.
std::span<const imaging::AugmentKind> allowed_ops(Severity s);

/// After-augmentation counts of the reference dataset breakdown:
/// (1805, 900, 1200, 900, 1000), 5805 in total.
ClassCounts table2_targets();
/// Original counts of the same breakdown: (1805, 370, 999, 193, 295).
ClassCounts table2_originals();

struct PlannedSample {
  std::string source_id;
  imaging::AugmentOp op;
  std::string new_id;
  Severity label = Severity::NoDR;
  bool operator==(const PlannedSample&) const = default;
};

struct AugmentationPlan {
  ClassCounts original_counts{};
  ClassCounts target_counts{};
  std::vector<PlannedSample> samples;

  ClassCounts synthetic_counts() const;
  std::size_t total_after() const;
  bool operator==(const AugmentationPlan&) const = default;
};

/// For each class, schedules (target - original) synthetic samples: the
/// i-th one uses source i mod n and op kind i mod |allowed|, with the op's
/// parameter drawn from the class's seeded stream. Ranges: rotate
/// [-25, 25] deg, brightness [0.8, 1.2], contrast [1.1, 1.5], noise sigma
/// [0.01, 0.03], zoom [1.05, 1.2].
/// Throws TargetBelowOriginal, or InvalidArgument when a class with no
/// sources (or no allowed ops) needs synthetic samples.
AugmentationPlan build_augmentation_plan(const std::array<std::vector<std::string>, kSeverityCount>& sources,
                                         const ClassCounts& targets, std::uint64_t seed);

/// Plan over anonymous sources "c<label>-<i>"; used to check target
/// arithmetic without a manifest.
AugmentationPlan build_augmentation_plan(const ClassCounts& counts, const ClassCounts& targets, std::uint64_t seed);

/// Sources grouped by label, in manifest order.
std::array<std::vector<std::string>, kSeverityCount> sources_by_class(const std::vector<const ManifestEntry*>& entries);

/// Image persistence used when executing a plan.
class ImageStore {
 public:
  virtual ~ImageStore() = default;
  virtual imaging::RasterImage load(const ManifestEntry& entry) = 0;
  /// Persists a synthetic image and returns the manifest path for it.
  virtual std::string store(const std::string& image_id, const imaging::RasterImage& img) = 0;
};

/// Manifest paths are resolved against `root`; synthetic images are written
/// as binary PPM under `root/synthetic/`.
class DirectoryImageStore : public ImageStore {
 public:
  explicit DirectoryImageStore(std::filesystem::path root) : root_(std::move(root)) {}
  imaging::RasterImage load(const ManifestEntry& entry) override;
  std::string store(const std::string& image_id, const imaging::RasterImage& img) override;

 private:
  std::filesystem::path root_;
};

/// Renders every planned sample and returns the manifest extended with the
/// synthetic entries. The input manifest is not modified; on error nothing
/// is committed (already-written image files may remain).
DatasetManifest execute_plan(const AugmentationPlan& plan, const DatasetManifest& manifest, ImageStore& store);

}  // namespace retina::dataset

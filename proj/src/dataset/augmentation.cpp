#include "retina/dataset/augmentation.hpp"

#include "retina/core/bytes.hpp"
#include "retina/core/rng.hpp"
#include "retina/imaging/codec.hpp"

namespace retina::dataset {

using imaging::AugmentKind;
using imaging::AugmentOp;

std::span<const AugmentKind> allowed_ops(Severity s) {
  static constexpr AugmentKind kMild[] = {AugmentKind::HFlip, AugmentKind::VFlip, AugmentKind::Rotate,
                                          AugmentKind::Brightness};
  static constexpr AugmentKind kModerate[] = {AugmentKind::HFlip, AugmentKind::Rotate};
  static constexpr AugmentKind kSevere[] = {AugmentKind::Contrast, AugmentKind::GaussianNoise, AugmentKind::Zoom};
  static constexpr AugmentKind kProliferate[] = {AugmentKind::Contrast, AugmentKind::GaussianNoise};
  switch (s) {
    case Severity::NoDR: return {};
    case Severity::Mild: return kMild;
    case Severity::Moderate: return kModerate;
    case Severity::Severe: return kSevere;
    case Severity::ProliferateDR: return kProliferate;
  }
  return {};
}

ClassCounts table2_targets() { return {1805, 900, 1200, 900, 1000}; }
ClassCounts table2_originals() { return {1805, 370, 999, 193, 295}; }

ClassCounts AugmentationPlan::synthetic_counts() const {
  ClassCounts out{};
  for (const auto& s : samples) ++out[static_cast<std::size_t>(ordinal(s.label))];
  return out;
}

std::size_t AugmentationPlan::total_after() const {
  std::size_t total = samples.size();
  for (auto c : original_counts) total += c;
  return total;
}

namespace {

AugmentOp draw_op(AugmentKind kind, Rng& rng) {
  switch (kind) {
    case AugmentKind::HFlip: return AugmentOp::hflip();
    case AugmentKind::VFlip: return AugmentOp::vflip();
    case AugmentKind::Rotate: return AugmentOp::rotate(rng.uniform(-25.0, 25.0));
    case AugmentKind::Brightness: return AugmentOp::brightness(rng.uniform(0.8, 1.2));
    case AugmentKind::Contrast: return AugmentOp::contrast(rng.uniform(1.1, 1.5));
    case AugmentKind::GaussianNoise: {
      const double sigma = rng.uniform(0.01, 0.03);
      return AugmentOp::noise(sigma, rng.next_u64());
    }
    case AugmentKind::Zoom: return AugmentOp::zoom(rng.uniform(1.05, 1.2));
  }
  return AugmentOp::hflip();
}

}  // namespace

AugmentationPlan build_augmentation_plan(const std::array<std::vector<std::string>, kSeverityCount>& sources,
                                         const ClassCounts& targets, std::uint64_t seed) {
  AugmentationPlan plan;
  plan.target_counts = targets;
  for (auto cls : kAllSeverities) {
    const auto c = static_cast<std::size_t>(ordinal(cls));
    const auto& src = sources[c];
    plan.original_counts[c] = src.size();
    if (targets[c] < src.size())
      throw DatasetError(DatasetErrc::TargetBelowOriginal, std::string(severity_name(cls)) + ": target " +
                                                               std::to_string(targets[c]) + " below original count " +
                                                               std::to_string(src.size()));
  }
  for (auto cls : kAllSeverities) {
    const auto c = static_cast<std::size_t>(ordinal(cls));
    const auto& src = sources[c];
    const std::size_t extra = targets[c] - src.size();
    if (extra == 0) continue;
    const auto ops = allowed_ops(cls);
    if (src.empty() || ops.empty())
      throw DatasetError(DatasetErrc::InvalidArgument,
                         std::string(severity_name(cls)) + ": synthetic samples requested but no sources or ops allowed");
    Rng rng(derive_seed(seed, 1000 + c));
    for (std::size_t i = 0; i < extra; ++i) {
      const auto& source = src[i % src.size()];
      PlannedSample s;
      s.source_id = source;
      s.op = draw_op(ops[i % ops.size()], rng);
      s.new_id = source + "~aug" + std::to_string(i / src.size());
      s.label = cls;
      plan.samples.push_back(std::move(s));
    }
  }
  return plan;
}

AugmentationPlan build_augmentation_plan(const ClassCounts& counts, const ClassCounts& targets, std::uint64_t seed) {
  std::array<std::vector<std::string>, kSeverityCount> sources;
  for (std::size_t c = 0; c < sources.size(); ++c)
    for (std::size_t i = 0; i < counts[c]; ++i) sources[c].push_back("c" + std::to_string(c) + "-" + std::to_string(i));
  return build_augmentation_plan(sources, targets, seed);
}

std::array<std::vector<std::string>, kSeverityCount> sources_by_class(const std::vector<const ManifestEntry*>& entries) {
  std::array<std::vector<std::string>, kSeverityCount> out;
  for (const auto* e : entries)
    if (!e->synthetic()) out[static_cast<std::size_t>(ordinal(e->label))].push_back(e->image_id);
  return out;
}

imaging::RasterImage DirectoryImageStore::load(const ManifestEntry& entry) {
  const auto path = root_ / entry.path;
  Bytes bytes;
  try {
    bytes = read_file(path);
  } catch (const std::exception&) {
    throw DatasetError(DatasetErrc::MissingSource, "cannot read image '" + path.string() + "'");
  }
  try {
    return imaging::decode_image(bytes);
  } catch (const imaging::ImageError& e) {
    throw DatasetError(DatasetErrc::MissingSource, "cannot decode image '" + path.string() + "': " + e.what());
  }
}

std::string DirectoryImageStore::store(const std::string& image_id, const imaging::RasterImage& img) {
  const std::string rel = "synthetic/" + image_id + ".ppm";
  try {
    write_file(root_ / rel, imaging::encode_ppm(img));
  } catch (const std::exception& e) {
    throw DatasetError(DatasetErrc::WriteFailure, e.what());
  }
  return rel;
}

DatasetManifest execute_plan(const AugmentationPlan& plan, const DatasetManifest& manifest, ImageStore& store) {
  for (const auto& s : plan.samples) {
    if (!manifest.contains(s.source_id) || manifest.at(s.source_id).synthetic())
      throw DatasetError(DatasetErrc::MissingSource, "plan references unknown original '" + s.source_id + "'");
  }
  std::vector<ManifestEntry> produced;
  produced.reserve(plan.samples.size());
  for (const auto& s : plan.samples) {
    const auto& source = manifest.at(s.source_id);
    const auto image = imaging::apply(s.op, store.load(source));
    ManifestEntry e;
    e.image_id = s.new_id;
    e.path = store.store(s.new_id, image);
    e.label = source.label;
    e.source_id = s.source_id;
    e.op = s.op;
    produced.push_back(std::move(e));
  }
  DatasetManifest out = manifest;
  for (auto& e : produced) out.add(std::move(e));
  return out;
}

}  // namespace retina::dataset

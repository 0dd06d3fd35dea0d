#include <algorithm>
#include <filesystem>
#include <map>
#include <set>

#include "doctest.h"
#include "retina/core/rng.hpp"
#include "retina/dataset/augmentation.hpp"
#include "retina/dataset/split.hpp"
#include "retina/dataset/synthetic.hpp"
#include "retina/imaging/codec.hpp"
#include "retina/imaging/transform.hpp"

using namespace retina;
using namespace retina::dataset;
namespace fs = std::filesystem;

namespace {

template <class F>
DatasetErrc error_code(F&& f) {
  try {
    f();
  } catch (const DatasetError& e) {
    return e.code();
  }
  FAIL("expected DatasetError");
  return DatasetErrc::InvalidArgument;
}

DatasetManifest manifest_with_counts(const ClassCounts& counts) {
  DatasetManifest m;
  for (std::size_t c = 0; c < counts.size(); ++c)
    for (std::size_t i = 0; i < counts[c]; ++i)
      m.add({"img" + std::to_string(c) + "_" + std::to_string(i), "x.png", static_cast<Severity>(c), {}, {}});
  return m;
}

fs::path scratch_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("retina_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("severity names") {
  CHECK(severity_name(Severity::NoDR) == "No_DR");
  CHECK(severity_name(Severity::ProliferateDR) == "Proliferate_DR");
  CHECK(severity_from_ordinal(7) == std::nullopt);
  CHECK(severity_from_name("Moderate") == Severity::Moderate);
}

TEST_CASE("load_manifest") {
  const auto m = parse_manifest(
      "image_id,path,label,provenance,source_id,op\n"
      "img1,a.png,0,orig,,\n"
      "img2,b.png,4,orig,,\r\n");
  REQUIRE(m.size() == 2);
  CHECK(m.at("img1").label == Severity::NoDR);
  CHECK(m.at("img2").label == Severity::ProliferateDR);

  CHECK(error_code([] { parse_manifest("image_id,path,label\nimg1,a.png,7\n"); }) == DatasetErrc::UnknownLabel);
  CHECK(error_code([] { parse_manifest("image_id,path,label\nimg1,a.png,1\nimg1,b.png,2\n"); }) ==
        DatasetErrc::DuplicateId);
  CHECK(error_code([] { parse_manifest("id,path,label\n"); }) == DatasetErrc::ParseError);
  CHECK(error_code([] { parse_manifest("image_id,path,label\nimg1,a.png\n"); }) == DatasetErrc::ParseError);
  CHECK(error_code([] { parse_manifest("image_id,path,label\nimg1,a.png,x\n"); }) == DatasetErrc::ParseError);
  CHECK(error_code([] {
          parse_manifest("image_id,path,label,provenance,source_id,op\ns1,s.ppm,1,syn,ghost,hflip\n");
        }) == DatasetErrc::MissingSource);

  SUBCASE("round trip with synthetic rows") {
    DatasetManifest src;
    src.add({"a", "a.png", Severity::Severe, {}, {}});
    src.add({"a~aug0", "synthetic/a~aug0.ppm", Severity::Severe, "a", imaging::AugmentOp::noise(0.0213, 99)});
    CHECK(parse_manifest(format_manifest(src)) == src);
  }
}

TEST_CASE("split sizes follow the floor rule") {
  CHECK(split_sizes(1805, {}) == PartitionSizes{1263, 270, 272});
  CHECK(split_sizes(20, {}) == PartitionSizes{14, 3, 3});
  CHECK(split_sizes(0, {}) == PartitionSizes{0, 0, 0});
  CHECK(split_sizes(1, {}) == PartitionSizes{0, 0, 1});
  CHECK_THROWS_AS(split_sizes(10, {0.7, 0.2, 0.2}), DatasetError);
  // property: for every n the train share is exactly floor(0.7 n)
  for (std::size_t n = 0; n < 3000; ++n) {
    const auto s = split_sizes(n, {});
    CHECK(s.train + s.validation + s.test == n);
    CHECK(s.train == (7 * n) / 10);
    CHECK(s.validation == (15 * n) / 100);
  }
}

TEST_CASE("stratified_split") {
  const auto m = manifest_with_counts(table2_originals());
  const auto split = stratified_split(m, {}, 42);
  CHECK(split.partition.size() == 3662);
  std::map<std::pair<int, Partition>, std::size_t> tally;
  for (const auto& [id, p] : split.partition) ++tally[{ordinal(m.at(id).label), p}];
  CHECK(tally[{0, Partition::Train}] == 1263);
  CHECK(tally[{0, Partition::Validation}] == 270);
  CHECK(tally[{0, Partition::Test}] == 272);
  for (std::size_t c = 0; c < 5; ++c) {
    const auto expect = split_sizes(table2_originals()[c], {});
    CHECK(tally[{static_cast<int>(c), Partition::Train}] == expect.train);
    CHECK(tally[{static_cast<int>(c), Partition::Test}] == expect.test);
  }
  CHECK(stratified_split(m, {}, 42) == split);
  CHECK_FALSE(stratified_split(m, {}, 43) == split);

  CHECK(error_code([] { stratified_split(DatasetManifest{}, {}, 1); }) == DatasetErrc::EmptyManifest);
  // a class with no members is fine
  const auto sparse = manifest_with_counts({20, 0, 0, 0, 3});
  CHECK(stratified_split(sparse, {}, 1).ids(Partition::Train).size() == 14 + 2);
}

TEST_CASE("synthetic entries never leave the training partition") {
  auto m = manifest_with_counts({10, 10, 10, 10, 10});
  const auto split = stratified_split(m, {}, 5);
  for (const auto& id : split.ids(Partition::Test))
    m.add({id + "~leak", "x.ppm", m.at(id).label, id, imaging::AugmentOp::hflip()});
  for (const auto& id : split.ids(Partition::Train))
    m.add({id + "~aug0", "x.ppm", m.at(id).label, id, imaging::AugmentOp::vflip()});
  for (auto p : {Partition::Validation, Partition::Test})
    for (const auto* e : partition_members(m, split, p)) CHECK_FALSE(e->synthetic());
  const auto train = partition_members(m, split, Partition::Train);
  CHECK(train.size() == 2 * split.ids(Partition::Train).size());
}

TEST_CASE("augmentation plan reproduces the reference breakdown") {
  const auto plan = build_augmentation_plan(table2_originals(), table2_targets(), 1);
  CHECK(plan.synthetic_counts() == ClassCounts{0, 530, 201, 707, 705});
  CHECK(plan.total_after() == 5805);
  for (const auto& s : plan.samples) {
    const auto ops = allowed_ops(s.label);
    CHECK(std::find(ops.begin(), ops.end(), s.op.kind) != ops.end());
    imaging::validate(s.op);
  }
  std::set<std::string> ids;
  for (const auto& s : plan.samples) CHECK(ids.insert(s.new_id).second);

  SUBCASE("targets equal to originals give an empty plan") {
    CHECK(build_augmentation_plan(table2_originals(), table2_originals(), 1).samples.empty());
  }
  SUBCASE("round-robin source usage") {
    auto targets = table2_originals();
    targets[1] = 900;
    const auto mild = build_augmentation_plan(table2_originals(), targets, 3);
    std::map<std::string, int> uses;
    for (const auto& s : mild.samples) ++uses[s.source_id];
    CHECK(uses.size() == 370);
    int lo = 1 << 30, hi = 0;
    for (const auto& [id, n] : uses) {
      lo = std::min(lo, n);
      hi = std::max(hi, n);
    }
    CHECK(hi <= 2);  // ceil(530 / 370)
    CHECK(hi - lo <= 1);
  }
  SUBCASE("parameter ranges") {
    for (const auto& s : plan.samples) {
      switch (s.op.kind) {
        case imaging::AugmentKind::Rotate: CHECK(std::abs(s.op.param) <= 25.0); break;
        case imaging::AugmentKind::Brightness: CHECK((s.op.param >= 0.8 && s.op.param <= 1.2)); break;
        case imaging::AugmentKind::Contrast: CHECK((s.op.param >= 1.1 && s.op.param <= 1.5)); break;
        case imaging::AugmentKind::GaussianNoise: CHECK((s.op.param >= 0.01 && s.op.param <= 0.03)); break;
        case imaging::AugmentKind::Zoom: CHECK((s.op.param >= 1.05 && s.op.param <= 1.2)); break;
        default: break;
      }
    }
  }
  CHECK(build_augmentation_plan(table2_originals(), table2_targets(), 1) == plan);
  auto low = table2_targets();
  low[3] = 100;
  CHECK(error_code([&] { build_augmentation_plan(table2_originals(), low, 1); }) == DatasetErrc::TargetBelowOriginal);
  CHECK(error_code([] { build_augmentation_plan(ClassCounts{5, 0, 0, 0, 0}, ClassCounts{6, 0, 0, 0, 0}, 1); }) ==
        DatasetErrc::InvalidArgument);
}

TEST_CASE("execute_plan") {
  const auto root = scratch_dir("execute_plan");
  imaging::RasterImage img(4, 3, 3);
  for (std::size_t i = 0; i < img.data.size(); ++i) img.data[i] = static_cast<std::uint8_t>(i * 7);
  write_file(root / "src.png", imaging::encode_png(img));
  DatasetManifest m;
  m.add({"src", "src.png", Severity::Mild, {}, {}});
  DirectoryImageStore store(root);

  SUBCASE("empty plan leaves the manifest unchanged") {
    CHECK(execute_plan(AugmentationPlan{}, m, store) == m);
  }
  SUBCASE("single hflip") {
    AugmentationPlan plan;
    plan.samples.push_back({"src", imaging::AugmentOp::hflip(), "src~aug0", Severity::Mild});
    const auto out = execute_plan(plan, m, store);
    REQUIRE(out.size() == 2);
    const auto& syn = out.at("src~aug0");
    CHECK(syn.synthetic());
    CHECK(syn.source_id == "src");
    CHECK(store.load(syn) == imaging::hflip(img));
  }
  SUBCASE("missing source") {
    AugmentationPlan plan;
    plan.samples.push_back({"ghost", imaging::AugmentOp::hflip(), "g0", Severity::Mild});
    CHECK(error_code([&] { execute_plan(plan, m, store); }) == DatasetErrc::MissingSource);
    DatasetManifest dangling;
    dangling.add({"gone", "does-not-exist.png", Severity::Mild, {}, {}});
    plan.samples[0].source_id = "gone";
    CHECK(error_code([&] { execute_plan(plan, dangling, store); }) == DatasetErrc::MissingSource);
  }
  SUBCASE("re-execution is byte-identical") {
    const auto plan = build_augmentation_plan(sources_by_class(m.originals()), ClassCounts{0, 5, 0, 0, 0}, 11);
    const auto first = execute_plan(plan, m, store);
    std::map<std::string, Bytes> bytes;
    for (const auto& e : first.entries())
      if (e.synthetic()) bytes[e.image_id] = read_file(root / e.path);
    const auto second = execute_plan(plan, m, store);
    CHECK(second == first);
    for (const auto& [id, b] : bytes) CHECK(read_file(root / second.at(id).path) == b);
  }
  fs::remove_all(root);
}

TEST_CASE("assign_folds") {
  auto ids_for = [](std::size_t n) {
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < n; ++i) ids.push_back("id" + std::to_string(i));
    return ids;
  };
  SUBCASE("10 items, k = 5") {
    const auto ids = ids_for(10);
    const auto folds = assign_folds(ids, std::vector<Severity>(10, Severity::Mild), 5, 1);
    std::set<std::string> all;
    for (int f = 0; f < 5; ++f) {
      const auto members = folds.ids(f);
      CHECK(members.size() == 2);
      for (const auto& id : members) CHECK(all.insert(id).second);
    }
    CHECK(all.size() == 10);
  }
  SUBCASE("7 items, k = 5") {
    const auto folds = assign_folds(ids_for(7), std::vector<Severity>(7, Severity::NoDR), 5, 1);
    std::vector<std::size_t> sizes;
    for (int f = 0; f < 5; ++f) sizes.push_back(folds.ids(f).size());
    CHECK(sizes == std::vector<std::size_t>{2, 2, 1, 1, 1});
  }
  SUBCASE("per-class balance property") {
    Rng rng(17);
    for (int trial = 0; trial < 40; ++trial) {
      const std::size_t n = rng.uniform_int(200);
      const int k = 2 + static_cast<int>(rng.uniform_int(6));
      std::vector<Severity> labels;
      for (std::size_t i = 0; i < n; ++i) labels.push_back(static_cast<Severity>(rng.uniform_int(5)));
      const auto ids = ids_for(n);
      const auto folds = assign_folds(ids, labels, k, rng.next_u64());
      CHECK(folds.fold.size() == n);
      for (auto cls : kAllSeverities) {
        std::vector<int> sizes(static_cast<std::size_t>(k), 0);
        for (std::size_t i = 0; i < n; ++i)
          if (labels[i] == cls) ++sizes[static_cast<std::size_t>(folds.fold.at(ids[i]))];
        const auto [lo, hi] = std::minmax_element(sizes.begin(), sizes.end());
        CHECK(*hi - *lo <= 1);
      }
    }
  }
  SUBCASE("determinism and errors") {
    const auto ids = ids_for(30);
    std::vector<Severity> labels(30, Severity::Severe);
    CHECK(assign_folds(ids, labels, 5, 9) == assign_folds(ids, labels, 5, 9));
    CHECK(error_code([&] { assign_folds(ids, labels, 1, 9); }) == DatasetErrc::InvalidArgument);
    // more folds than class members is allowed
    CHECK(assign_folds(ids_for(3), std::vector<Severity>(3, Severity::Mild), 5, 2).fold.size() == 3);
  }
}

TEST_CASE("split and fold files round-trip") {
  const auto m = manifest_with_counts({12, 7, 9, 3, 4});
  const auto split = stratified_split(m, {}, 8);
  auto parsed = parse_split(format_split(split));
  parsed.seed = split.seed;
  CHECK(parsed == split);
  const auto train = split.ids(Partition::Train);
  std::vector<Severity> labels;
  for (const auto& id : train) labels.push_back(m.at(id).label);
  const auto folds = assign_folds(train, labels, 5, 8);
  auto pf = parse_folds(format_folds(folds));
  pf.seed = folds.seed;
  CHECK(pf == folds);
}

TEST_CASE("synthetic corpus") {
  const auto a = make_synthetic_corpus({.per_class = 4, .seed = 3});
  const auto b = make_synthetic_corpus({.per_class = 4, .seed = 3});
  REQUIRE(a.size() == 20);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].label == static_cast<Severity>(i % 5));
    CHECK(a[i].image == b[i].image);
  }
  const auto root = scratch_dir("synthetic");
  const auto m = write_synthetic_corpus({.per_class = 2, .seed = 3}, root);
  CHECK(m.size() == 10);
  DirectoryImageStore store(root);
  CHECK(store.load(m.entries()[0]).width == 32);
  fs::remove_all(root);
}

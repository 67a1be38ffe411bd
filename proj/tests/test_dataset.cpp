#include <algorithm>
#include <functional>
#include <filesystem>
#include <fstream>
#include <set>

#include <gtest/gtest.h>

#include "fixtures.hpp"

using namespace mvrec;
namespace fs = std::filesystem;

namespace {

BuildOptions mvtec_options(const fs::path& root) {
  BuildOptions opt;
  opt.root = root;
  return opt;
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::IoError;
}

// Independent reading of the documented sampler: per-class generator seeded
// from (seed, dataset/class), partial Fisher-Yates over the train members.
std::vector<std::string> oracle_support(const DatasetManifest& m, const std::string& cls, std::size_t k,
                                        std::uint64_t seed) {
  std::vector<std::string> pool;
  for (const auto& inst : m.instances)
    if (inst.class_label == cls && inst.split == Split::Train) pool.push_back(inst.instance_id);
  std::mt19937_64 engine(mix_seed(seed, fnv1a(m.dataset_name + "/" + cls)));
  auto below = [&](std::uint64_t bound) -> std::uint64_t {
    if (bound <= 1) return 0;
    const std::uint64_t max = ~std::uint64_t{0};
    const std::uint64_t limit = max - max % bound;
    std::uint64_t x = engine();
    while (x >= limit) x = engine();
    return x % bound;
  };
  std::vector<std::string> out;
  for (std::size_t i = 0; i < k; ++i) {
    std::swap(pool[i], pool[i + below(pool.size() - i)]);
    out.push_back(pool[i]);
  }
  return out;
}

}  // namespace

TEST(MvtecBuild, InstancesClassesAndSplits) {
  fixture::TempDir dir;
  fixture::write_mvtec_fixture(dir.path());
  const auto ms = build_manifests(mvtec_options(dir.path()));
  ASSERT_EQ(ms.size(), 2u);
  EXPECT_EQ(ms[0].dataset_name, "gadget");
  EXPECT_EQ(ms[1].dataset_name, "widget");
  const auto& w = ms[1];
  EXPECT_EQ(w.classes, (std::vector<std::string>{"broken", "crack", "speck"}));
  EXPECT_EQ(w.instances.size(), 9u);
  const auto counts = w.counts();
  EXPECT_EQ(counts.at("broken"), (SplitCounts{2, 2}));
  EXPECT_EQ(counts.at("crack"), (SplitCounts{2, 1}));
  EXPECT_EQ(counts.at("speck"), (SplitCounts{1, 1}));

  const auto* two = w.find("widget/broken/001-2");
  ASSERT_NE(two, nullptr);
  EXPECT_EQ(two->bbox, (Rect{30, 20, 5, 7}));
  EXPECT_EQ(two->area, 35);
  EXPECT_EQ(two->image_path, "widget/test/broken/001.png");
  EXPECT_EQ(mask_stats(two->mask).bbox, two->bbox);
  EXPECT_EQ(two->image_size(), (ImageSize{48, 40}));
  for (const auto& inst : w.instances) {
    EXPECT_NE(inst.class_label, "good");
    EXPECT_NE(inst.class_label, "combined");
  }
}

TEST(MvtecBuild, SplitIsCeilHalfPerClass) {
  EXPECT_EQ(train_count(1), 1u);
  EXPECT_EQ(train_count(2), 1u);
  EXPECT_EQ(train_count(3), 2u);
  EXPECT_EQ(train_count(10), 5u);
  EXPECT_EQ(train_count(11), 6u);
}

TEST(MvtecBuild, MinAreaAndKmaxFilters) {
  fixture::TempDir dir;
  fixture::write_mvtec_fixture(dir.path());
  auto opt = mvtec_options(dir.path());
  opt.min_area = 2;
  auto ms = build_manifests(opt);
  ASSERT_EQ(ms.size(), 2u);
  EXPECT_EQ(ms[1].classes, (std::vector<std::string>{"broken", "crack"}));
  opt.min_area = 1;
  opt.k_max = 2;  // classes need 4 instances; only "broken" survives, so no dataset has 2 classes
  EXPECT_TRUE(build_manifests(opt).empty());
}

TEST(MvtecBuild, CategoryFilterAndClassMap) {
  fixture::TempDir dir;
  fixture::write_mvtec_fixture(dir.path());
  auto opt = mvtec_options(dir.path());
  opt.categories = {"gadget"};
  opt.class_map = {{"dent", "deformation"}, {"scratch", "surface"}};
  const auto ms = build_manifests(opt);
  ASSERT_EQ(ms.size(), 1u);
  EXPECT_EQ(ms[0].classes, (std::vector<std::string>{"deformation", "surface"}));
  opt.class_map = {{"dent", "deformation"}};
  EXPECT_EQ(code_of([&] { build_manifests(opt); }), ErrorCode::UnknownClass);
}

TEST(MvtecBuild, ConnectivityChangesInstanceCount) {
  fixture::TempDir dir;
  const fs::path t = dir / "cat" / "test" / "a", g = dir / "cat" / "ground_truth" / "a";
  const fs::path t2 = dir / "cat" / "test" / "b", g2 = dir / "cat" / "ground_truth" / "b";
  for (const auto& p : {t, g, t2, g2}) fs::create_directories(p);
  Image mask(8, 8, 1, 0);
  mask.at(1, 1) = mask.at(2, 2) = 255;
  for (const auto& [td, gd] : {std::pair{t, g}, std::pair{t2, g2}}) {
    for (const std::string stem : {"0", "1"}) {
      write_png(td / (stem + ".png"), Image(8, 8, 3));
      write_png(gd / (stem + "_mask.png"), mask);
    }
  }
  auto opt = mvtec_options(dir.path());
  opt.connectivity = Connectivity::Eight;
  EXPECT_EQ(build_manifests(opt)[0].instances.size(), 4u);
  opt.connectivity = Connectivity::Four;
  EXPECT_EQ(build_manifests(opt)[0].instances.size(), 8u);
}

TEST(MvtecBuild, MissingMaskAndMissingRoot) {
  fixture::TempDir dir;
  fixture::write_mvtec_fixture(dir.path());
  fs::remove(dir / "widget" / "ground_truth" / "crack" / "001_mask.png");
  EXPECT_EQ(code_of([&] { build_manifests(mvtec_options(dir.path())); }), ErrorCode::MissingMask);
  EXPECT_EQ(code_of([&] { build_manifests(mvtec_options(dir / "nope")); }), ErrorCode::IoError);
}

TEST(MvtecBuild, DeterministicAcrossThreadCounts) {
  fixture::TempDir dir;
  fixture::write_mvtec_fixture(dir.path());
  auto opt = mvtec_options(dir.path());
  opt.threads = 1;
  const auto a = manifests_to_string(build_manifests(opt));
  opt.threads = 4;
  const auto b = manifests_to_string(build_manifests(opt));
  EXPECT_EQ(a, b);
  opt.seed = 1;
  const auto c = build_manifests(opt);
  EXPECT_EQ(c[1].instances.size(), 9u);
}

TEST(BboxCsv, BuildsBoxInstances) {
  fixture::TempDir dir;
  std::ofstream(dir / "annotations.csv") << "image,width,height,class,x,y,w,h\n"
                                            "a.png,20,10,hole,1,1,3,3\n"
                                            "a.png,20,10,hole,10,2,2,2\n"
                                            "b.png,20,10,stain,0,0,5,5\n"
                                            "c.png,20,10,stain,4,4,1,1\n";
  BuildOptions opt;
  opt.layout = DatasetLayout::BboxCsv;
  opt.root = dir.path();
  opt.dataset_name = "pcb";
  const auto ms = build_manifests(opt);
  ASSERT_EQ(ms.size(), 1u);
  EXPECT_EQ(ms[0].classes, (std::vector<std::string>{"hole", "stain"}));
  const auto* inst = ms[0].find("pcb/hole/a-2");
  ASSERT_NE(inst, nullptr);
  EXPECT_EQ(inst->bbox, (Rect{10, 2, 2, 2}));
  EXPECT_EQ(inst->area, 4);

  std::ofstream(dir / "annotations.csv") << "image,width,height,class,x,y,w,h\na.png,20,10,hole,19,1,3,3\n";
  EXPECT_EQ(code_of([&] { build_manifests(opt); }), ErrorCode::InvalidArgument);
  std::ofstream(dir / "annotations.csv") << "image,class\n";
  EXPECT_EQ(code_of([&] { build_manifests(opt); }), ErrorCode::CorruptFile);
}

TEST(ManifestFile, RoundTripAndErrors) {
  fixture::TempDir dir;
  fixture::write_mvtec_fixture(dir.path());
  const auto ms = build_manifests(mvtec_options(dir.path()));
  write_manifests(dir / "m.json", ms);
  EXPECT_EQ(read_manifests(dir / "m.json"), ms);
  EXPECT_EQ(code_of([] { manifests_from_string("{\"format\":\"x\",\"version\":1,\"datasets\":[]}"); }),
            ErrorCode::CorruptFile);
  EXPECT_EQ(code_of([] { manifests_from_string("not json"); }), ErrorCode::CorruptFile);
  EXPECT_EQ(code_of([&] { read_manifests(dir / "missing.json"); }), ErrorCode::IoError);
}

TEST(Sampler, MatchesIndependentOracle) {
  const auto m = make_synthetic_manifest("toy", 4, 13, 3);
  for (std::uint64_t seed : {0u, 1u, 2u, 3u, 4u, 77u})
    for (std::size_t k : {1u, 3u, 5u}) {
      const auto ep = sample_support(m, k, seed);
      ASSERT_EQ(ep.support.size(), 4 * k);
      for (std::size_t c = 0; c < 4; ++c) {
        const auto want = oracle_support(m, m.classes[c], k, seed);
        for (std::size_t i = 0; i < k; ++i) {
          EXPECT_EQ(ep.support[c * k + i].instance_id, want[i]);
          EXPECT_EQ(ep.support[c * k + i].label, c);
        }
      }
    }
}

TEST(Sampler, EpisodeInvariants) {
  const auto m = make_synthetic_manifest("toy", 5, 20, 0);
  const auto ep = sample_support(m, 5, 2);
  std::set<std::string> support, query;
  for (const auto& s : ep.support) support.insert(s.instance_id);
  for (const auto& q : ep.query) query.insert(q.instance_id);
  EXPECT_EQ(support.size(), 25u);
  EXPECT_EQ(query.size(), 50u);
  for (const auto& s : support) EXPECT_FALSE(query.contains(s));
  EXPECT_EQ(sample_support(m, 5, 2), ep);
  EXPECT_NE(sample_support(m, 5, 3).support, ep.support);
}

TEST(Sampler, InsufficientShots) {
  const auto m = make_synthetic_manifest("toy", 3, 6, 0);  // 3 train per class
  EXPECT_NO_THROW(sample_support(m, 3, 0));
  EXPECT_EQ(code_of([&] { sample_support(m, 4, 0); }), ErrorCode::InsufficientShots);
  EXPECT_EQ(code_of([&] { sample_support(m, 0, 0); }), ErrorCode::InvalidArgument);
}

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <vector>

#include <gtest/gtest.h>

#include "fixtures.hpp"

using namespace mvrec;

namespace {

Mask random_mask(Rng& rng, int w, int h, double density) {
  Mask m(w, h);
  for (auto& v : m.pixels()) v = rng.uniform() < density ? 1 : 0;
  return m;
}

// Stack-based flood fill, labelling in raster order of the seed pixel.
Raster<std::int32_t> flood_fill_labels(const Mask& m, bool eight) {
  Raster<std::int32_t> lab(m.width(), m.height(), 1, 0);
  int next = 0;
  for (int y = 0; y < m.height(); ++y)
    for (int x = 0; x < m.width(); ++x) {
      if (!m.at(x, y) || lab.at(x, y)) continue;
      ++next;
      std::vector<std::pair<int, int>> stack = {{x, y}};
      lab.at(x, y) = next;
      while (!stack.empty()) {
        auto [cx, cy] = stack.back();
        stack.pop_back();
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            if (dx == 0 && dy == 0) continue;
            if (!eight && dx != 0 && dy != 0) continue;
            const int nx = cx + dx, ny = cy + dy;
            if (nx < 0 || ny < 0 || nx >= m.width() || ny >= m.height()) continue;
            if (!m.at(nx, ny) || lab.at(nx, ny)) continue;
            lab.at(nx, ny) = next;
            stack.push_back({nx, ny});
          }
      }
    }
  return lab;
}

DefectInstance square_instance(const std::string& id, int side, int x, int y, int box) {
  Mask m(side, side);
  for (int yy = y; yy < y + box; ++yy)
    for (int xx = x; xx < x + box; ++xx) m.at(xx, yy) = 1;
  DefectInstance inst;
  inst.instance_id = id;
  inst.class_label = "c";
  inst.mask = rle_encode(m);
  inst.bbox = Rect{x, y, box, box};
  inst.area = static_cast<long long>(box) * box;
  return inst;
}

}  // namespace

TEST(Rle, RoundTripRandomMasks) {
  Rng rng(5);
  for (int t = 0; t < 200; ++t) {
    const int w = 1 + static_cast<int>(rng.below(40)), h = 1 + static_cast<int>(rng.below(40));
    const Mask m = random_mask(rng, w, h, rng.uniform());
    const RleMask r = rle_encode(m);
    EXPECT_EQ(rle_decode(r), m);
    EXPECT_EQ(rle_from_string(rle_to_string(r), w, h), r);
  }
}

TEST(Rle, TextFormAndErrors) {
  Mask m(4, 2);
  m.at(1, 0) = m.at(2, 0) = m.at(3, 1) = 1;
  EXPECT_EQ(rle_to_string(rle_encode(m)), "1 2 4 1");
  EXPECT_THROW(rle_from_string("1 2 3", 4, 2), Error);
  EXPECT_THROW(rle_from_string("1  2 4 1", 4, 2), Error);
  EXPECT_THROW(rle_from_string("a", 4, 2), Error);
}

TEST(Rle, StatsCentroidAndBox) {
  const auto inst = square_instance("a", 96, 40, 40, 8);
  const auto s = mask_stats(inst.mask);
  EXPECT_EQ(s.area, 64);
  EXPECT_EQ(s.bbox, (Rect{40, 40, 8, 8}));
  EXPECT_DOUBLE_EQ(s.centroid_x, 44.0);
  EXPECT_DOUBLE_EQ(s.centroid_y, 44.0);
}

TEST(Components, MatchFloodFillOracle) {
  Rng rng(2024);
  for (int t = 0; t < 300; ++t) {
    const Mask m = random_mask(rng, 32, 32, 0.2 + 0.5 * rng.uniform());
    for (auto conn : {Connectivity::Four, Connectivity::Eight}) {
      const auto got = connected_components(m, conn);
      const auto want = flood_fill_labels(m, conn == Connectivity::Eight);
      ASSERT_EQ(got.labels, want) << "trial " << t;
      std::map<int, long long> areas;
      for (auto v : want.pixels())
        if (v) ++areas[v];
      ASSERT_EQ(got.components.size(), areas.size());
      for (const auto& c : got.components) EXPECT_EQ(c.area, areas[c.label]);
    }
  }
}

TEST(Components, DiagonalDiffersByConnectivity) {
  Mask m(3, 3);
  m.at(0, 0) = m.at(1, 1) = m.at(2, 2) = 1;
  EXPECT_EQ(connected_components(m, Connectivity::Four).components.size(), 3u);
  EXPECT_EQ(connected_components(m, Connectivity::Eight).components.size(), 1u);
  const auto c = connected_components(m, Connectivity::Eight).components.front();
  EXPECT_EQ(c.bbox, (Rect{0, 0, 3, 3}));
  EXPECT_EQ(c.area, 3);
}

TEST(Views, DefaultConfigGivesTwentySevenCrops) {
  const auto inst = square_instance("a", 96, 40, 40, 8);
  const auto views = generate_views(inst, AugmentConfig{});
  ASSERT_EQ(views.size(), 27u);
  for (int i = 0; i < 27; ++i) {
    EXPECT_EQ(views[i].view_id, i);
    EXPECT_EQ(views[i].scale_index, i / 9);
    EXPECT_EQ(views[i].offset_index, i % 9);
    EXPECT_EQ(views[i].rotation, 0);
    EXPECT_EQ(views[i].flip, Flip::None);
  }
}

TEST(Views, GoldenCropRectangles) {
  // 96x96 image, 8x8 square at (40, 40): centroid 44, base side 32,
  // sides 32/48/64 and offset steps 4/6/8.
  const auto inst = square_instance("a", 96, 40, 40, 8);
  const auto v = generate_views(inst, AugmentConfig{});
  EXPECT_EQ(v[0].crop, (Rect{24, 24, 32, 32}));
  EXPECT_EQ(v[4].crop, (Rect{28, 28, 32, 32}));
  EXPECT_EQ(v[5].crop, (Rect{32, 28, 32, 32}));
  EXPECT_EQ(v[13].crop, (Rect{20, 20, 48, 48}));
  EXPECT_EQ(v[18].crop, (Rect{4, 4, 64, 64}));
  EXPECT_EQ(v[22].crop, (Rect{12, 12, 64, 64}));
  EXPECT_EQ(v[26].crop, (Rect{20, 20, 64, 64}));
}

TEST(Views, CropsInsideImageAndCoverTheDefect) {
  Rng rng(9);
  for (int t = 0; t < 200; ++t) {
    const int side = 40 + static_cast<int>(rng.below(100));
    const int box = 1 + static_cast<int>(rng.below(10));
    const int x = static_cast<int>(rng.below(side - box)), y = static_cast<int>(rng.below(side - box));
    const auto inst = square_instance("r", side, x, y, box);
    const double cx = x + box / 2.0, cy = y + box / 2.0;
    for (const auto& v : generate_views(inst, AugmentConfig{})) {
      ASSERT_TRUE(v.crop.inside({side, side}));
      ASSERT_EQ(v.crop.w, v.crop.h);
      EXPECT_TRUE(v.crop.intersects(inst.bbox));
      EXPECT_TRUE(v.crop.contains(cx, cy));
      const int expected_side =
          std::clamp(static_cast<int>(std::floor(std::floor(side / 3.0 + 0.5) * (1.0 + 0.5 * v.scale_index) + 0.5)),
                     1, side);
      EXPECT_EQ(v.crop.w, expected_side);
    }
  }
}

TEST(Views, OffsetGridIsSymmetricBeforeClamping) {
  const auto inst = square_instance("a", 200, 96, 96, 8);
  const auto v = generate_views(inst, AugmentConfig{});
  for (int s = 0; s < 3; ++s) {
    const Rect c = v[s * 9 + 4].crop;
    for (int o = 0; o < 9; ++o) {
      const Rect r = v[s * 9 + o].crop;
      const int delta = static_cast<int>(std::floor(c.w / 8.0 + 0.5));
      EXPECT_EQ(r.x - c.x, (o % 3 - 1) * delta);
      EXPECT_EQ(r.y - c.y, (o / 3 - 1) * delta);
    }
  }
}

TEST(Views, SingleScaleSingleOffset) {
  const auto inst = square_instance("a", 96, 10, 10, 4);
  AugmentConfig cfg;
  cfg.num_scale = 1;
  cfg.num_offset = 1;
  EXPECT_EQ(generate_views(inst, cfg).size(), 1u);
  cfg.enable_rotation = cfg.enable_flip = true;
  const auto v = generate_views(inst, cfg);
  ASSERT_EQ(v.size(), 8u);
  std::set<std::pair<int, Flip>> combos;
  for (const auto& x : v) combos.insert({x.rotation, x.flip});
  EXPECT_EQ(combos.size(), 8u);
}

TEST(Views, AblationSetSizes) {
  const auto inst = square_instance("a", 96, 40, 40, 8);
  const std::map<std::string, std::size_t> expected = {{"none", 1},          {"scale", 3},       {"rotate", 4},
                                                       {"flip", 2},          {"offset", 9},      {"scale+rotate", 12},
                                                       {"scale+flip", 6},    {"scale+offset", 27}};
  for (const auto& set : ablation_view_sets(inst, inst.image_size(), AugmentConfig{}))
    EXPECT_EQ(set.views.size(), expected.at(set.name)) << set.name;
  EXPECT_THROW(ablation_config("bogus", AugmentConfig{}), Error);
}

TEST(Views, InvalidConfigAndEmptyMask) {
  const auto inst = square_instance("a", 32, 4, 4, 4);
  AugmentConfig cfg;
  cfg.num_offset = 4;
  EXPECT_THROW(generate_views(inst, cfg), Error);
  cfg = AugmentConfig{};
  cfg.num_scale = 4;
  EXPECT_THROW(generate_views(inst, cfg), Error);
  DefectInstance empty = inst;
  empty.mask = rle_encode(Mask(32, 32));
  try {
    generate_views(empty, AugmentConfig{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyInstance);
  }
}

TEST(Render, TransformsInvertAndAlphaModes) {
  Rng rng(4);
  Image img(24, 24, 3);
  for (auto& v : img.pixels()) v = static_cast<std::uint8_t>(rng.below(256));
  Mask m(24, 24);
  m.at(5, 6) = 1;
  for (int rot : {0, 90, 180, 270})
    for (Flip f : {Flip::None, Flip::Horizontal}) {
      ViewSpec s{"a", 0, Rect{2, 3, 12, 12}, 0, 0, rot, f, MaskMode::Instance};
      const auto out = render_view(img, m, s, 12);
      const Image back = invert_transform(out.patch, rot, f);
      for (int y = 0; y < 12; ++y)
        for (int x = 0; x < 12; ++x)
          for (int c = 0; c < 3; ++c) ASSERT_EQ(back.at(x, y, c), img.at(x + 2, y + 3, c));
      const Mask alpha = invert_transform(*out.alpha, rot, f);
      EXPECT_EQ(alpha.at(3, 3), 255);
      EXPECT_EQ(count_set(alpha), 1);
    }
  ViewSpec s{"a", 0, Rect{0, 0, 12, 12}, 0, 0, 0, Flip::None, MaskMode::FullForeground};
  const auto full = render_view(img, m, s, 6);
  EXPECT_EQ(count_set(*full.alpha), 36);
  s.mask_mode = MaskMode::None;
  EXPECT_FALSE(render_view(img, m, s, 6).alpha.has_value());
}

TEST(Render, RotationIsCounterClockwise) {
  Image img(2, 2);
  img.at(1, 0) = 7;  // top-right
  const Image r = rotate_ccw(img, 90);
  EXPECT_EQ(r.at(0, 0), 7);  // moves to top-left
}

TEST(ViewsFile, RoundTrip) {
  fixture::TempDir dir;
  const auto inst = square_instance("cat/type/img-1", 96, 40, 40, 8);
  AugmentConfig cfg;
  cfg.enable_flip = true;
  cfg.mask_mode = MaskMode::FullForeground;
  const auto views = generate_views(inst, cfg);
  write_views(dir / "v.jsonl", views);
  EXPECT_EQ(read_views(dir / "v.jsonl"), views);
  EXPECT_THROW(view_from_line("{\"instance_id\":1}"), Error);
}

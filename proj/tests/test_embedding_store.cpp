#include <bit>
#include <cmath>
#include <functional>

#include <gtest/gtest.h>

#include "fixtures.hpp"

using namespace mvrec;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::IoError;
}

std::vector<ViewSpec> toy_views(const std::vector<std::string>& ids, int v) {
  std::vector<ViewSpec> out;
  for (const auto& id : ids)
    for (int j = 0; j < v; ++j) out.push_back(ViewSpec{id, j, Rect{0, 0, 4, 4}, 0, j, 0, Flip::None, MaskMode::Instance});
  return out;
}

EmbeddingFile toy_file(const std::vector<ViewSpec>& views, std::uint32_t c, std::uint64_t seed, std::string tag = {}) {
  Rng rng(seed);
  EmbeddingFile f;
  f.channels = c;
  f.backbone_tag = std::move(tag);
  for (const auto& v : views) {
    EmbeddingRecord r{embedding_key(v.instance_id, v.view_id), {}};
    for (std::uint32_t k = 0; k < c; ++k) r.values.push_back(static_cast<float>(rng.normal()));
    f.records.push_back(std::move(r));
  }
  return f;
}

}  // namespace

TEST(Mve, KeyFormat) {
  EXPECT_EQ(embedding_key("bottle/crack/001-1", 26), "bottle/crack/001-1/26");
  const auto [id, view] = split_embedding_key("bottle/crack/001-1/26");
  EXPECT_EQ(id, "bottle/crack/001-1");
  EXPECT_EQ(view, 26);
  EXPECT_EQ(code_of([] { split_embedding_key("novview"); }), ErrorCode::CorruptFile);
  EXPECT_EQ(code_of([] { split_embedding_key("a/b/x"); }), ErrorCode::CorruptFile);
}

TEST(Mve, RoundTripBothVersions) {
  const auto views = toy_views({"a/1", "b/2"}, 3);
  for (std::string tag : {"", "ViT-L/14"}) {
    const auto f = toy_file(views, 5, 1, tag);
    const auto bytes = serialize_mve(f);
    EXPECT_EQ(bytes.substr(0, 4), "MVE1");
    EXPECT_EQ(static_cast<int>(bytes[4]), tag.empty() ? 1 : 2);
    EXPECT_EQ(parse_mve(bytes), f);
  }
}

TEST(Mve, ByteLayout) {
  EmbeddingFile f;
  f.channels = 1;
  f.records.push_back({"x/0", {1.5f}});
  const auto bytes = serialize_mve(f);
  ASSERT_EQ(bytes.size(), 4u + 12u + 4u + 3u + 4u);
  EXPECT_EQ(bytes.substr(16, 4), std::string("\x03\x00\x00\x00", 4));
  EXPECT_EQ(bytes.substr(20, 3), "x/0");
  const auto bits = std::bit_cast<std::uint32_t>(1.5f);
  for (int i = 0; i < 4; ++i) EXPECT_EQ(static_cast<unsigned char>(bytes[23 + i]), (bits >> (8 * i)) & 0xFF);
}

TEST(Mve, CorruptionIsReportedWithOffset) {
  const auto f = toy_file(toy_views({"a"}, 2), 3, 2);
  const auto bytes = serialize_mve(f);
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_EQ(code_of([&] { parse_mve(bad_magic); }), ErrorCode::CorruptFile);
  auto bad_version = bytes;
  bad_version[4] = 9;
  try {
    parse_mve(bad_version);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("offset 4"), std::string::npos) << e.what();
  }
  EXPECT_EQ(code_of([&] { parse_mve(bytes.substr(0, bytes.size() - 1)); }), ErrorCode::CorruptFile);
  EXPECT_EQ(code_of([&] { parse_mve(bytes + "z"); }), ErrorCode::CorruptFile);
  auto nan = f;
  nan.records[0].values[1] = std::nanf("");
  EXPECT_EQ(code_of([&] { parse_mve(serialize_mve(nan)); }), ErrorCode::CorruptFile);
  auto dup = f;
  dup.records[1].key = dup.records[0].key;
  EXPECT_EQ(code_of([&] { parse_mve(serialize_mve(dup)); }), ErrorCode::CorruptFile);
  auto short_rec = f;
  short_rec.records[0].values.pop_back();
  EXPECT_EQ(code_of([&] { serialize_mve(short_rec); }), ErrorCode::ChannelMismatch);
}

TEST(Store, AveragesViewsInRawSpace) {
  const auto views = toy_views({"a", "b"}, 4);
  const auto f = toy_file(views, 6, 3, "tag");
  const auto r = load_embeddings(f, views);
  ASSERT_EQ(r.embeddings.size(), 2u);
  EXPECT_EQ(r.backbone_tag, "tag");
  const auto& a = r.embeddings.at("a");
  EXPECT_EQ(a.num_views(), 4u);
  for (std::size_t c = 0; c < 6; ++c) {
    double s = 0;
    for (int v = 0; v < 4; ++v) s += static_cast<double>(f.records[v].values[c]);
    EXPECT_NEAR(a.feature[c], s / 4.0, 1e-12);
  }
}

TEST(Store, SingleViewFeatureIsTheView) {
  const auto views = toy_views({"a"}, 1);
  const auto f = toy_file(views, 4, 9);
  const auto e = load_embeddings(f, views).embeddings.at("a");
  for (std::size_t c = 0; c < 4; ++c) EXPECT_EQ(e.feature[c], static_cast<double>(f.records[0].values[c]));
}

TEST(Store, NormalizeBeforeAverage) {
  Tensor2<double> v(2, 2, std::vector<double>{3, 4, 0, 2});
  const auto raw = make_embedding("x", v);
  const auto unit = make_embedding("x", v, true);
  EXPECT_DOUBLE_EQ(raw.feature[0], 1.5);
  EXPECT_DOUBLE_EQ(raw.feature[1], 3.0);
  EXPECT_NEAR(unit.feature[0], 0.3, 1e-15);
  EXPECT_NEAR(unit.feature[1], 0.9, 1e-15);
}

TEST(Store, PermutedRecordsGiveSameFeatures) {
  const auto views = toy_views({"a", "b"}, 3);
  auto f = toy_file(views, 4, 5);
  const auto before = load_embeddings(f, views).embeddings;
  std::reverse(f.records.begin(), f.records.end());
  const auto after = load_embeddings(f, views).embeddings;
  for (const auto& [id, e] : before) EXPECT_EQ(e.feature, after.at(id).feature);
}

TEST(Store, MissingViewsStrictAndLenient) {
  const auto views = toy_views({"a", "b"}, 3);
  auto f = toy_file(views, 4, 5);
  f.records.erase(f.records.begin() + 4);
  EXPECT_EQ(code_of([&] { load_embeddings(f, views); }), ErrorCode::MissingViews);
  LoadOptions lenient;
  lenient.strict = false;
  const auto r = load_embeddings(f, views, lenient);
  EXPECT_EQ(r.embeddings.size(), 1u);
  ASSERT_EQ(r.missing.size(), 1u);
  EXPECT_EQ(r.missing[0].instance_id, "b");
  EXPECT_EQ(r.missing[0].expected, 3u);
  EXPECT_EQ(r.missing[0].found, 2u);
}

TEST(Store, UnknownKeysAndChannelMismatch) {
  const auto views = toy_views({"a"}, 2);
  auto f = toy_file(views, 4, 5);
  f.records.push_back({"zzz/0", std::vector<float>(4, 1.0f)});
  EXPECT_EQ(code_of([&] { load_embeddings(f, views); }), ErrorCode::UnknownKey);
  LoadOptions lenient;
  lenient.strict = false;
  EXPECT_EQ(load_embeddings(f, views, lenient).unexpected_keys, std::vector<std::string>{"zzz/0"});
  LoadOptions c8;
  c8.expected_channels = 8;
  EXPECT_EQ(code_of([&] { load_embeddings(f, views, c8); }), ErrorCode::ChannelMismatch);
}

TEST(Store, FileRoundTrip) {
  fixture::TempDir dir;
  const auto views = toy_views({"a", "b"}, 2);
  const auto f = toy_file(views, 3, 8, "t");
  write_mve(dir / "e.mve", f);
  EXPECT_EQ(read_mve(dir / "e.mve"), f);
  EXPECT_EQ(code_of([&] { read_mve(dir / "none.mve"); }), ErrorCode::IoError);
}

TEST(FeaturesCsv, RoundTripIsExact) {
  fixture::TempDir dir;
  const auto views = toy_views({"a", "b"}, 3);
  const auto emb = load_embeddings(toy_file(views, 5, 4), views).embeddings;
  const std::map<std::string, std::string> labels = {{"a", "crack"}, {"b", "hole"}};
  EXPECT_EQ(export_features_csv(emb, labels, dir / "f.csv"), 2u);
  const auto rows = read_features_csv(dir / "f.csv");
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].instance_id, "a");
  EXPECT_EQ(rows[1].class_label, "hole");
  EXPECT_EQ(rows[0].feature, emb.at("a").feature);
  EXPECT_EQ(code_of([&] { export_features_csv(emb, {{"a", "crack"}}, dir / "g.csv"); }), ErrorCode::UnknownClass);
}

TEST(Synthetic, ViewsAreStableAcrossViewCounts) {
  const auto m = make_synthetic_manifest("s", 3, 4, 0);
  AugmentConfig one;
  one.num_scale = 1;
  one.num_offset = 1;
  const auto v27 = generate_all_views({m}, AugmentConfig{});
  const auto v1 = generate_all_views({m}, one);
  EXPECT_EQ(v27.size(), 12u * 27u);
  const SyntheticConfig cfg;
  const auto e27 = synthetic_embeddings({m}, v27, cfg);
  const auto e1 = synthetic_embeddings({m}, v1, cfg);
  ASSERT_EQ(e1.records.size(), 12u);
  for (const auto& r : e1.records) {
    auto it = std::find_if(e27.records.begin(), e27.records.end(), [&](const auto& x) { return x.key == r.key; });
    ASSERT_NE(it, e27.records.end());
    EXPECT_EQ(it->values, r.values);
  }
}

TEST(Synthetic, ZeroNoiseGivesClassCenters) {
  const auto m = make_synthetic_manifest("s", 4, 4, 0);
  SyntheticConfig cfg;
  cfg.sigma_inst = cfg.sigma_view = 0.0;
  const auto views = generate_all_views({m}, AugmentConfig{});
  const auto emb = load_embeddings(synthetic_embeddings({m}, views, cfg), views).embeddings;
  std::map<std::string, std::vector<double>> first;
  for (const auto& inst : m.instances) {
    const auto& f = emb.at(inst.instance_id).feature;
    EXPECT_NEAR(norm<double>(f), 1.0, 1e-6);
    auto [it, fresh] = first.try_emplace(inst.class_label, f);
    if (!fresh) {
      EXPECT_EQ(it->second, f);
    }
  }
  // orthogonal centres
  EXPECT_NEAR(cosine_sim<double>(first["class0"], first["class1"]), 0.0, 1e-6);
}

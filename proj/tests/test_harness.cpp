#include <cmath>
#include <functional>
#include <set>

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

struct SyntheticSetup {
  std::vector<DatasetManifest> manifests;
  EmbeddingMap embeddings;
};

SyntheticSetup synthetic(std::size_t datasets, double sigma_inst, double sigma_view, const AugmentConfig& aug = {},
                         std::size_t per_class = 12) {
  SyntheticSetup s;
  for (std::size_t d = 0; d < datasets; ++d)
    s.manifests.push_back(make_synthetic_manifest("d" + std::to_string(d), 3, per_class, d));
  SyntheticConfig cfg;
  cfg.sigma_inst = sigma_inst;
  cfg.sigma_view = sigma_view;
  const auto views = generate_all_views(s.manifests, aug);
  s.embeddings = load_embeddings(synthetic_embeddings(s.manifests, views, cfg), views).embeddings;
  return s;
}

ExperimentSpec cheap_spec(std::vector<ClassifierKind> kinds) {
  ExperimentSpec spec;
  spec.classifiers = std::move(kinds);
  spec.ks = {1, 3};
  spec.seeds = {0, 1, 2};
  spec.config.zip_f.iterations = spec.config.tip_f.iterations = spec.config.baseline.iterations = 20;
  return spec;
}

AugmentConfig single_view() {
  AugmentConfig a;
  a.num_scale = 1;
  a.num_offset = 1;
  return a;
}

}  // namespace

TEST(Harness, NoiselessDataIsPerfectForEveryClassifier) {
  const auto s = synthetic(1, 0.0, 0.0, single_view());
  auto spec = cheap_spec({kAllClassifiers.begin(), kAllClassifiers.end()});
  const auto t = run_experiment(s.manifests, s.embeddings, spec);
  EXPECT_EQ(t.rows.size(), 8u * 2u * 3u);
  for (const auto& m : t.methods)
    for (auto k : t.ks) EXPECT_DOUBLE_EQ(t.cell("d0", m, k), 100.0) << m;
}

TEST(Harness, CanonicalRowOrderAndTotals) {
  const auto s = synthetic(2, 0.3, 0.3, single_view());
  auto spec = cheap_spec({ClassifierKind::Zip, ClassifierKind::Knn});
  spec.threads = 3;
  const auto t = run_experiment(s.manifests, s.embeddings, spec);
  ASSERT_EQ(t.rows.size(), 2u * 2u * 2u * 3u);
  std::size_t i = 0;
  for (const auto& m : t.methods)
    for (auto k : t.ks)
      for (const auto& d : t.datasets)
        for (auto seed : t.seeds) {
          const auto& r = t.rows[i++];
          EXPECT_EQ(r.method, m);
          EXPECT_EQ(r.k, k);
          EXPECT_EQ(r.dataset, d);
          EXPECT_EQ(r.seed, seed);
          EXPECT_EQ(r.total, 18u);  // 3 classes x 6 test instances
          EXPECT_LE(r.correct, r.total);
        }
}

TEST(Harness, ThreadCountDoesNotChangeResults) {
  const auto s = synthetic(2, 0.6, 0.6, single_view());
  auto spec = cheap_spec({ClassifierKind::Zip, ClassifierKind::ZipF, ClassifierKind::LinearProb});
  spec.threads = 1;
  const auto a = run_experiment(s.manifests, s.embeddings, spec);
  spec.threads = 4;
  const auto b = run_experiment(s.manifests, s.embeddings, spec);
  EXPECT_EQ(a.rows, b.rows);
  EXPECT_EQ(report_json(a), report_json(b));
}

TEST(Harness, AverageIsMeanOfCells) {
  const auto s = synthetic(3, 0.8, 0.5, single_view());
  const auto t = run_experiment(s.manifests, s.embeddings, cheap_spec({ClassifierKind::Zip, ClassifierKind::ProtoNet}));
  for (const auto& m : t.methods)
    for (auto k : t.ks) {
      double sum = 0;
      for (const auto& d : t.datasets) {
        double cell = 0;
        for (const auto& r : t.rows)
          if (r.method == m && r.k == k && r.dataset == d) cell += 100.0 * r.correct / r.total;
        cell /= 3.0;
        EXPECT_NEAR(t.cell(d, m, k), cell, 1e-9);
        EXPECT_GE(cell, 0.0);
        EXPECT_LE(cell, 100.0);
        sum += cell;
      }
      EXPECT_NEAR(t.average(m, k), sum / 3.0, 1e-9);
    }
}

TEST(Harness, SingleQueryIsAllOrNothing) {
  ResultTable t;
  t.name = "one";
  t.datasets = {"d"};
  t.methods = {"zip"};
  t.ks = {1};
  t.seeds = {0};
  t.rows = {{"d", "zip", 1, 0, 1, 1, {}}};
  EXPECT_DOUBLE_EQ(t.cell("d", "zip", 1), 100.0);
  t.rows[0].correct = 0;
  EXPECT_DOUBLE_EQ(t.cell("d", "zip", 1), 0.0);
}

TEST(Harness, CoverageAndEmptyListErrors) {
  auto s = synthetic(1, 0.1, 0.1, single_view());
  s.embeddings.erase(s.embeddings.begin());
  EXPECT_EQ(code_of([&] { run_experiment(s.manifests, s.embeddings, cheap_spec({ClassifierKind::Zip})); }),
            ErrorCode::CoverageError);
  const auto full = synthetic(1, 0.1, 0.1, single_view());
  EXPECT_EQ(code_of([&] { run_experiment(full.manifests, full.embeddings, cheap_spec({})); }),
            ErrorCode::InvalidArgument);
  auto spec = cheap_spec({ClassifierKind::Zip});
  spec.ks = {7};
  EXPECT_EQ(code_of([&] { run_experiment(full.manifests, full.embeddings, spec); }), ErrorCode::InsufficientShots);
}

TEST(Harness, TrainingAblationFrozenRowEqualsZip) {
  const auto s = synthetic(1, 0.8, 0.6, single_view());
  auto spec = cheap_spec({ClassifierKind::Zip});
  const auto zip = run_experiment(s.manifests, s.embeddings, spec);
  const auto tr = run_training_ablation(s.manifests, s.embeddings, spec);
  EXPECT_EQ(tr.name, "training");
  EXPECT_EQ(tr.methods, (std::vector<std::string>{"zip_f[frozen]", "zip_f[cache]", "zip_f[zip]", "zip_f[cache+zip]"}));
  for (std::size_t i = 0; i < zip.rows.size(); ++i) {
    EXPECT_EQ(tr.rows[i].correct, zip.rows[i].correct);
    EXPECT_FALSE(tr.rows[i].train_accuracy.has_value());
  }
  EXPECT_TRUE(tr.rows.back().train_accuracy.has_value());
}

TEST(Harness, EmbeddingVariantsNoneRowUsesOneView) {
  std::vector<DatasetManifest> ms = {make_synthetic_manifest("d0", 3, 12, 0)};
  SyntheticConfig cfg;
  std::vector<EmbeddingMap> maps;
  for (auto name : kAblationViewSets) {
    const auto views = generate_all_views(ms, ablation_config(name, AugmentConfig{}));
    maps.push_back(load_embeddings(synthetic_embeddings(ms, views, cfg), views).embeddings);
  }
  EXPECT_EQ(maps[0].begin()->second.num_views(), 1u);
  EXPECT_EQ(maps.back().begin()->second.num_views(), 27u);
  std::vector<EmbeddingVariant> variants;
  for (std::size_t i = 0; i < maps.size(); ++i) variants.push_back({std::string(kAblationViewSets[i]), &maps[i]});
  const auto t = run_embedding_variants("augmentation", ms, variants, cheap_spec({ClassifierKind::Zip}));
  EXPECT_EQ(t.methods.size(), 8u);
  EXPECT_EQ(t.methods.front(), "none/zip");
  EXPECT_EQ(t.methods.back(), "scale+offset/zip");
}

TEST(Report, JsonRoundTripAndCsvAgree) {
  const auto s = synthetic(2, 0.9, 0.6, single_view());
  const auto t = run_experiment(s.manifests, s.embeddings, cheap_spec({ClassifierKind::Zip, ClassifierKind::Knn}));
  const auto back = parse_report_json(report_json(t));
  EXPECT_EQ(back.rows, t.rows);
  EXPECT_EQ(back.methods, t.methods);
  EXPECT_EQ(report_json(back), report_json(t));
  const auto cells = parse_report_csv(report_csv(t));
  ASSERT_EQ(cells.size(), 2u * 2u * 2u + 2u * 2u);
  for (const auto& c : cells) {
    const double want = c.dataset == "Average" ? back.average(c.method, c.k) : back.cell(c.dataset, c.method, c.k);
    EXPECT_NEAR(c.accuracy, want, 1e-9);
    EXPECT_EQ(c.table, "main");
  }
}

TEST(Report, FourteenCategoriesGiveFifteenCells) {
  ResultTable t;
  t.name = "main";
  t.methods = {"zip"};
  t.ks = {5};
  t.seeds = {0};
  for (int d = 0; d < 14; ++d) {
    t.datasets.push_back("cat" + std::to_string(d));
    t.rows.push_back({t.datasets.back(), "zip", 5, 0, static_cast<std::size_t>(d), 13, {}});
  }
  const auto cells = parse_report_csv(report_csv(t));
  EXPECT_EQ(cells.size(), 15u);
  const auto text = report_text(t);
  EXPECT_NE(text.find("Average"), std::string::npos);
  EXPECT_NE(text.find("cat13"), std::string::npos);
}

TEST(Report, TextLayoutOneDecimal) {
  ResultTable t;
  t.name = "main";
  t.datasets = {"bottle", "cable"};
  t.methods = {"zip", "zip_f"};
  t.ks = {1};
  t.seeds = {0, 1};
  t.rows = {{"bottle", "zip", 1, 0, 2, 3, {}}, {"bottle", "zip", 1, 1, 3, 3, {}},
            {"cable", "zip", 1, 0, 1, 4, {}},  {"cable", "zip", 1, 1, 1, 4, {}},
            {"bottle", "zip_f", 1, 0, 3, 3, {}}, {"bottle", "zip_f", 1, 1, 3, 3, {}},
            {"cable", "zip_f", 1, 0, 4, 4, {}},  {"cable", "zip_f", 1, 1, 2, 4, {}}};
  const auto text = report_text(t);
  const std::string expected =
      "main (accuracy %, mean over 2 seeds)\n"
      "  K  Method  bottle  cable  Average\n"
      "-----------------------------------\n"
      "  1  zip       83.3   25.0     54.2\n"
      "  1  zip_f    100.0   75.0     87.5\n";
  EXPECT_EQ(text, expected);
}

TEST(Report, EmptyTableLeavesNoFile) {
  fixture::TempDir dir;
  ResultTable empty;
  empty.name = "main";
  for (auto f : {ReportFormat::Json, ReportFormat::Csv, ReportFormat::Text}) {
    const auto path = dir / ("main" + std::string(file_extension(f)));
    EXPECT_EQ(code_of([&] { emit_report(empty, f, path); }), ErrorCode::EmptyTable);
    EXPECT_FALSE(std::filesystem::exists(path));
  }
  ResultTable one;
  one.name = "x";
  one.datasets = {"d"};
  one.methods = {"zip"};
  one.ks = {1};
  one.seeds = {0};
  one.rows = {{"d", "zip", 1, 0, 1, 2, {}}};
  EXPECT_EQ(code_of([&] { emit_report(one, ReportFormat::Csv, dir / "no" / "dir" / "x.csv"); }), ErrorCode::IoError);
  emit_report(one, ReportFormat::Csv, dir / "x.csv");
  EXPECT_EQ(fixture::slurp(dir / "x.csv"), "table,method,k,dataset,accuracy\nx,zip,1,d,50\nx,zip,1,Average,50\n");
}

TEST(Report, FormatNames) {
  EXPECT_EQ(parse_report_format("text-table"), ReportFormat::Text);
  EXPECT_EQ(parse_report_format("csv"), ReportFormat::Csv);
  EXPECT_EQ(code_of([] { parse_report_format("xml"); }), ErrorCode::InvalidArgument);
  EXPECT_EQ(code_of([] { parse_report_json("{}"); }), ErrorCode::CorruptFile);
  EXPECT_EQ(code_of([] { parse_report_csv("a,b\n"); }), ErrorCode::CorruptFile);
}

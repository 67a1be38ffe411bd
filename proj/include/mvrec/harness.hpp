#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mvrec/classifiers/classifier.hpp"
#include "mvrec/dataset.hpp"
#include "mvrec/embedding_store.hpp"
#include "mvrec/error.hpp"
#include "mvrec/parallel.hpp"

namespace mvrec {

/// One (dataset, method, K, seed) evaluation.
struct ResultRow {
  std::string dataset;
  std::string method;  // classifier name, or "<variant>/<classifier>" in ablations
  std::size_t k = 0;
  std::uint64_t seed = 0;
  std::size_t correct = 0;
  std::size_t total = 0;
  /// Accuracy on the support view embeddings, for classifiers that train.
  std::optional<double> train_accuracy;

  double accuracy() const { return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total); }
  friend bool operator==(const ResultRow&, const ResultRow&) = default;
};

/// Per-seed rows plus their aggregates. Rows are stored in canonical order
/// (method, K, dataset, seed), each axis in the order given here.
struct ResultTable {
  std::string name;
  std::vector<std::string> datasets;
  std::vector<std::string> methods;
  std::vector<std::size_t> ks;
  std::vector<std::uint64_t> seeds;
  std::vector<ResultRow> rows;

  bool empty() const { return rows.empty(); }

  /// Mean accuracy over seeds, in percent.
  double cell(const std::string& dataset, const std::string& method, std::size_t k) const {
    double sum = 0.0;
    std::size_t count = 0;
    for (const auto& r : rows)
      if (r.dataset == dataset && r.method == method && r.k == k) {
        sum += r.accuracy();
        ++count;
      }
    require(count > 0, ErrorCode::InvalidArgument, "no rows for " + dataset + "/" + method + "/K=" + std::to_string(k));
    return 100.0 * sum / static_cast<double>(count);
  }

  /// Unweighted mean of the per-dataset cells, in percent.
  double average(const std::string& method, std::size_t k) const {
    require(!datasets.empty(), ErrorCode::EmptyTable, "table has no datasets");
    double sum = 0.0;
    for (const auto& d : datasets) sum += cell(d, method, k);
    return sum / static_cast<double>(datasets.size());
  }
};

struct ExperimentSpec {
  std::vector<ClassifierKind> classifiers;
  std::vector<std::size_t> ks = {1, 3, 5};
  std::vector<std::uint64_t> seeds = kDefaultSeeds;
  ClassifierConfig config{};
  std::size_t threads = 1;
};

/// Averaged features and view embeddings for one support set.
struct EpisodeData {
  SupportCache cache;
  TrainingBatch views;
};

inline EpisodeData episode_data(const Episode& ep, const EmbeddingMap& embeddings) {
  require(!ep.support.empty(), ErrorCode::InvalidArgument, "episode without support");
  const auto& first = embeddings.at(ep.support.front().instance_id);
  const std::size_t c = first.channels();
  Tensor2<double> feats(ep.support.size(), c);
  std::vector<std::size_t> labels;
  std::size_t total_views = 0;
  for (const auto& s : ep.support) total_views += embeddings.at(s.instance_id).num_views();
  EpisodeData out;
  out.views.features = Tensor2<double>(total_views, c);
  std::size_t row = 0;
  for (std::size_t i = 0; i < ep.support.size(); ++i) {
    const auto& e = embeddings.at(ep.support[i].instance_id);
    require(e.channels() == c, ErrorCode::ChannelMismatch, e.instance_id + " has a different channel count");
    std::copy(e.feature.begin(), e.feature.end(), feats.row(i).begin());
    labels.push_back(ep.support[i].label);
    for (std::size_t v = 0; v < e.num_views(); ++v, ++row) {
      std::copy(e.views.row(v).begin(), e.views.row(v).end(), out.views.features.row(row).begin());
      out.views.labels.push_back(ep.support[i].label);
    }
  }
  out.cache = make_support_cache(std::move(feats), std::move(labels), ep.classes);
  return out;
}

inline void check_coverage(const std::vector<DatasetManifest>& manifests, const EmbeddingMap& embeddings) {
  std::size_t missing = 0;
  std::string first;
  for (const auto& m : manifests)
    for (const auto& inst : m.instances)
      if (!embeddings.contains(inst.instance_id)) {
        if (missing++ == 0) first = inst.instance_id;
      }
  require(missing == 0, ErrorCode::CoverageError,
          std::to_string(missing) + " instances without embeddings, first: " + first);
}

/// One method evaluated by the harness: a classifier, its configuration and
/// the embeddings it reads.
struct MethodJob {
  std::string label;
  ClassifierKind kind = ClassifierKind::Zip;
  ClassifierConfig config{};
  const EmbeddingMap* embeddings = nullptr;
};

/// Evaluates every job on every (dataset, K, seed) episode. Cells run in
/// parallel; results land in pre-assigned slots, so the output never
/// depends on scheduling.
inline ResultTable run_jobs(const std::string& name, const std::vector<DatasetManifest>& manifests,
                            const std::vector<MethodJob>& jobs, const std::vector<std::size_t>& ks,
                            const std::vector<std::uint64_t>& seeds, std::size_t threads) {
  require(!jobs.empty(), ErrorCode::InvalidArgument, "empty classifier list");
  require(!manifests.empty(), ErrorCode::InvalidArgument, "no datasets");
  require(!ks.empty() && !seeds.empty(), ErrorCode::InvalidArgument, "K list and seeds must be nonempty");
  for (const auto& j : jobs) check_coverage(manifests, *j.embeddings);

  ResultTable table;
  table.name = name;
  for (const auto& m : manifests) table.datasets.push_back(m.dataset_name);
  for (const auto& j : jobs) table.methods.push_back(j.label);
  table.ks = ks;
  table.seeds = seeds;

  // Episodes are sampled up front (cheap, and surfaces InsufficientShots before any training).
  std::vector<Episode> episodes;
  for (const auto& m : manifests)
    for (auto k : ks)
      for (auto seed : seeds) episodes.push_back(sample_support(m, k, seed));

  const std::size_t per_job = episodes.size();
  table.rows.resize(jobs.size() * per_job);
  parallel_for(table.rows.size(), threads, [&](std::size_t slot) {
    const auto& job = jobs[slot / per_job];
    const std::size_t e_index = slot % per_job;
    // canonical row position: job, K, dataset, seed
    const std::size_t n_seeds = seeds.size(), n_k = ks.size();
    const std::size_t d = e_index / (n_k * n_seeds), k_i = (e_index / n_seeds) % n_k, s_i = e_index % n_seeds;
    const Episode& ep = episodes[e_index];
    const auto data = episode_data(ep, *job.embeddings);
    auto clf = make_classifier(job.kind, job.config);
    clf->fit(data.cache, data.views);
    ResultRow row;
    row.dataset = ep.dataset_name;
    row.method = job.label;
    row.k = ep.k;
    row.seed = ep.seed;
    row.total = ep.query.size();
    for (const auto& q : ep.query) {
      if (clf->predict(job.embeddings->at(q.instance_id).feature) == q.label) ++row.correct;
    }
    if (clf->training()) row.train_accuracy = clf->training()->final.accuracy();
    const std::size_t pos = ((slot / per_job) * n_k + k_i) * manifests.size() * n_seeds + d * n_seeds + s_i;
    table.rows[pos] = std::move(row);
  });
  return table;
}

inline ResultTable run_experiment(const std::vector<DatasetManifest>& manifests, const EmbeddingMap& embeddings,
                                  const ExperimentSpec& spec, const std::string& name = "main") {
  std::vector<MethodJob> jobs;
  for (auto k : spec.classifiers) jobs.push_back({std::string(to_string(k)), k, spec.config, &embeddings});
  return run_jobs(name, manifests, jobs, spec.ks, spec.seeds, spec.threads);
}

struct EmbeddingVariant {
  std::string name;
  const EmbeddingMap* embeddings = nullptr;
};

/// One table over embedding variants (region handling, augmentation sets):
/// every classifier of `spec` on every variant, labelled "<variant>/<classifier>".
inline ResultTable run_embedding_variants(const std::string& name, const std::vector<DatasetManifest>& manifests,
                                          const std::vector<EmbeddingVariant>& variants, const ExperimentSpec& spec) {
  require(!variants.empty(), ErrorCode::InvalidArgument, "no embedding variants");
  std::vector<MethodJob> jobs;
  for (const auto& v : variants)
    for (auto k : spec.classifiers)
      jobs.push_back({v.name + "/" + std::string(to_string(k)), k, spec.config, v.embeddings});
  return run_jobs(name, manifests, jobs, spec.ks, spec.seeds, spec.threads);
}

struct TrainingSetting {
  std::string name;
  bool train_cache = false;
  bool train_zip = false;
};

inline const std::vector<TrainingSetting> kTrainingSettings = {
    {"frozen", false, false},
    {"cache", true, false},
    {"zip", false, true},
    {"cache+zip", true, true},
};

/// Zip-Adapter-F under the four trainable-flag settings.
inline ResultTable run_training_ablation(const std::vector<DatasetManifest>& manifests, const EmbeddingMap& embeddings,
                                         const ExperimentSpec& spec) {
  std::vector<MethodJob> jobs;
  for (const auto& s : kTrainingSettings) {
    ClassifierConfig cfg = spec.config;
    cfg.train_cache = s.train_cache;
    cfg.train_zip = s.train_zip;
    jobs.push_back({"zip_f[" + s.name + "]", ClassifierKind::ZipF, cfg, &embeddings});
  }
  return run_jobs("training", manifests, jobs, spec.ks, spec.seeds, spec.threads);
}

}  // namespace mvrec

#pragma once

#include <array>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mvrec/classifiers/baselines.hpp"
#include "mvrec/classifiers/zip_adapter.hpp"
#include "mvrec/classifiers/zip_trainer.hpp"
#include "mvrec/error.hpp"
#include "mvrec/numerics.hpp"

namespace mvrec {

enum class ClassifierKind { Zip, ZipF, Tip, TipF, Knn, ProtoNet, LinearProb, ClipAdapter };

inline constexpr std::array<ClassifierKind, 8> kAllClassifiers = {
    ClassifierKind::Zip,  ClassifierKind::ZipF,     ClassifierKind::Tip,        ClassifierKind::TipF,
    ClassifierKind::Knn,  ClassifierKind::ProtoNet, ClassifierKind::LinearProb, ClassifierKind::ClipAdapter,
};

constexpr std::string_view to_string(ClassifierKind k) noexcept {
  switch (k) {
    case ClassifierKind::Zip: return "zip";
    case ClassifierKind::ZipF: return "zip_f";
    case ClassifierKind::Tip: return "tip";
    case ClassifierKind::TipF: return "tip_f";
    case ClassifierKind::Knn: return "knn";
    case ClassifierKind::ProtoNet: return "protonet";
    case ClassifierKind::LinearProb: return "linearprob";
    case ClassifierKind::ClipAdapter: return "clip_adapter";
  }
  return "unknown";
}

inline ClassifierKind parse_classifier(std::string_view name) {
  for (auto k : kAllClassifiers)
    if (to_string(k) == name) return k;
  fail(ErrorCode::InvalidArgument, "unknown classifier '" + std::string(name) + "'");
}

/// Comma-separated list; order is preserved, duplicates rejected.
inline std::vector<ClassifierKind> parse_classifier_list(std::string_view list) {
  std::vector<ClassifierKind> out;
  std::size_t start = 0;
  while (start <= list.size()) {
    auto end = list.find(',', start);
    if (end == std::string_view::npos) end = list.size();
    const auto name = list.substr(start, end - start);
    if (!name.empty()) {
      const auto k = parse_classifier(name);
      require(std::find(out.begin(), out.end(), k) == out.end(), ErrorCode::InvalidArgument,
              "classifier listed twice: " + std::string(name));
      out.push_back(k);
    }
    start = end + 1;
  }
  return out;
}

struct ClassifierConfig {
  double zip_beta = 32.0;
  double tip_beta = 32.0;
  TrainConfig zip_f{};  // beta 1, alpha 0.5, lambda 4, lr 1e-4, 500 iterations
  bool train_cache = true;
  bool train_zip = true;
  bool adapt_cache = true;
  TrainConfig tip_f = [] {
    TrainConfig t;
    t.lambda = 0.0;
    return t;
  }();
  BaselineTrainConfig baseline{};
  ClipAdapterConfig clip_adapter{};
};

/// Common interface: fit on a support set, then score averaged query features.
class Classifier {
 public:
  virtual ~Classifier() = default;

  /// `cache` holds the averaged support features, `views` every support view embedding.
  void fit(const SupportCache& cache, const TrainingBatch& views) {
    fit_impl(cache, views);
    fitted_ = true;
  }

  std::vector<double> logits(std::span<const double> query) const {
    require(fitted_, ErrorCode::UntrainedState, std::string(to_string(kind())) + " used before fit");
    return logits_impl(query);
  }

  std::size_t predict(std::span<const double> query) const {
    const auto l = logits(query);
    return argmax<double>(l);
  }

  bool fitted() const { return fitted_; }
  virtual ClassifierKind kind() const = 0;

  /// Training-set accuracy and loss trace for the trained cache classifiers.
  const std::optional<TrainResult>& training() const { return training_; }

 protected:
  virtual void fit_impl(const SupportCache& cache, const TrainingBatch& views) = 0;
  virtual std::vector<double> logits_impl(std::span<const double> query) const = 0;

  std::optional<TrainResult> training_;

 private:
  bool fitted_ = false;
};

namespace detail {

class CacheClassifier final : public Classifier {
 public:
  CacheClassifier(ClassifierKind kind, const ClassifierConfig& cfg) : kind_(kind), cfg_(cfg) {}
  ClassifierKind kind() const override { return kind_; }

 protected:
  void fit_impl(const SupportCache& cache, const TrainingBatch& views) override {
    auto params = init_zip_params(cache);
    double beta = 0.0;
    switch (kind_) {
      case ClassifierKind::Zip: beta = cfg_.zip_beta; break;
      case ClassifierKind::Tip:
        beta = cfg_.tip_beta;
        params.adapt_cache = false;
        break;
      case ClassifierKind::ZipF:
        beta = cfg_.zip_f.beta;
        params.train_cache = cfg_.train_cache;
        params.train_zip = cfg_.train_zip;
        params.adapt_cache = cfg_.adapt_cache;
        if (!params.train_cache && !params.train_zip) {
          // nothing to fine-tune: this is the training-free Zip-Adapter
          beta = cfg_.zip_beta;
          break;
        }
        training_ = train_zip_adapter_f(cache, views, cfg_.zip_f, std::move(params));
        params = training_->params;
        break;
      case ClassifierKind::TipF:
        beta = cfg_.tip_f.beta;
        params.train_zip = false;
        params.adapt_cache = false;
        training_ = train_zip_adapter_f(cache, views, cfg_.tip_f, std::move(params));
        params = training_->params;
        break;
      default: fail(ErrorCode::InvalidArgument, "not a cache classifier");
    }
    predictor_.emplace(std::move(params), cache.onehot, beta);
  }

  std::vector<double> logits_impl(std::span<const double> query) const override {
    return predictor_->logits(query);
  }

 private:
  ClassifierKind kind_;
  ClassifierConfig cfg_;
  std::optional<ZipPredictor> predictor_;
};

class KnnClassifier final : public Classifier {
 public:
  ClassifierKind kind() const override { return ClassifierKind::Knn; }

 protected:
  void fit_impl(const SupportCache& cache, const TrainingBatch&) override { cache_ = cache; }
  std::vector<double> logits_impl(std::span<const double> q) const override { return knn_logits(q, cache_); }

 private:
  SupportCache cache_;
};

class ProtoNetClassifier final : public Classifier {
 public:
  ClassifierKind kind() const override { return ClassifierKind::ProtoNet; }

 protected:
  void fit_impl(const SupportCache& cache, const TrainingBatch&) override {
    protos_ = class_prototypes(cache.features, cache.labels, cache.n());
  }
  std::vector<double> logits_impl(std::span<const double> q) const override { return prototype_logits(q, protos_); }

 private:
  Tensor2<double> protos_;
};

class LinearProbeClassifier final : public Classifier {
 public:
  explicit LinearProbeClassifier(BaselineTrainConfig cfg) : cfg_(cfg) {}
  ClassifierKind kind() const override { return ClassifierKind::LinearProb; }

 protected:
  void fit_impl(const SupportCache& cache, const TrainingBatch& views) override {
    params_ = train_linear_probe(views, cache.n(), cfg_);
  }
  std::vector<double> logits_impl(std::span<const double> q) const override {
    return linear_probe_logits(q, params_);
  }

 private:
  BaselineTrainConfig cfg_;
  LinearProbeParams params_;
};

class ClipAdapterClassifier final : public Classifier {
 public:
  ClipAdapterClassifier(ClipAdapterConfig cfg, BaselineTrainConfig train) : cfg_(cfg), train_(train) {}
  ClassifierKind kind() const override { return ClassifierKind::ClipAdapter; }

 protected:
  void fit_impl(const SupportCache& cache, const TrainingBatch& views) override {
    protos_ = class_prototypes(cache.features, cache.labels, cache.n());
    params_ = train_clip_adapter(views, protos_, cfg_, train_);
  }
  std::vector<double> logits_impl(std::span<const double> q) const override {
    return clip_adapter_logits(q, params_, protos_, cfg_);
  }

 private:
  ClipAdapterConfig cfg_;
  BaselineTrainConfig train_;
  Tensor2<double> protos_;
  ClipAdapterParams params_;
};

}  // namespace detail

inline std::unique_ptr<Classifier> make_classifier(ClassifierKind kind, const ClassifierConfig& cfg) {
  switch (kind) {
    case ClassifierKind::Zip:
    case ClassifierKind::ZipF:
    case ClassifierKind::Tip:
    case ClassifierKind::TipF: return std::make_unique<detail::CacheClassifier>(kind, cfg);
    case ClassifierKind::Knn: return std::make_unique<detail::KnnClassifier>();
    case ClassifierKind::ProtoNet: return std::make_unique<detail::ProtoNetClassifier>();
    case ClassifierKind::LinearProb: return std::make_unique<detail::LinearProbeClassifier>(cfg.baseline);
    case ClassifierKind::ClipAdapter:
      return std::make_unique<detail::ClipAdapterClassifier>(cfg.clip_adapter, cfg.baseline);
  }
  fail(ErrorCode::InvalidArgument, "unknown classifier kind");
}

}  // namespace mvrec

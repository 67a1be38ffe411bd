#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "mvrec/error.hpp"
#include "mvrec/numerics.hpp"
#include "mvrec/tensor.hpp"

namespace mvrec {

/// Key-value memory of the cache classifiers: support features and their
/// one-hot labels. Rows are grouped by class in class order.
struct SupportCache {
  Tensor2<double> features;  // NK x C
  Tensor2<double> onehot;    // NK x N
  std::vector<std::size_t> labels;
  std::vector<std::string> classes;
  std::size_t k = 0;

  std::size_t n() const { return classes.size(); }
  std::size_t channels() const { return features.cols(); }
  std::size_t size() const { return features.rows(); }
};

inline SupportCache make_support_cache(Tensor2<double> features, std::vector<std::size_t> labels,
                                       std::vector<std::string> classes) {
  require(features.rows() == labels.size(), ErrorCode::ShapeMismatch,
          "support cache: " + std::to_string(features.rows()) + " rows vs " + std::to_string(labels.size()) +
              " labels");
  require(!labels.empty() && classes.size() >= 2, ErrorCode::InvalidArgument,
          "support cache needs rows and at least 2 classes");
  SupportCache cache;
  cache.onehot = Tensor2<double>(labels.size(), classes.size());
  std::vector<std::size_t> per_class(classes.size(), 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    require(labels[i] < classes.size(), ErrorCode::IndexOutOfRange,
            "support label " + std::to_string(labels[i]) + " >= N=" + std::to_string(classes.size()));
    cache.onehot(i, labels[i]) = 1.0;
    ++per_class[labels[i]];
  }
  cache.k = per_class[0];
  for (auto count : per_class)
    require(count == cache.k && count > 0, ErrorCode::InvalidArgument, "support classes need equal, nonzero K");
  cache.features = std::move(features);
  cache.labels = std::move(labels);
  cache.classes = std::move(classes);
  return cache;
}

/// Learnable state of Zip-Adapter-F: the ZIP linear map and the cache features.
struct ZipParams {
  Tensor2<double> w;  // C x C
  std::vector<double> b;
  Tensor2<double> cache_features;  // NK x C
  bool train_cache = true;
  bool train_zip = true;
  /// When true the cache is passed through ZIP like the queries; otherwise
  /// cache_features are used as already-adapted keys.
  bool adapt_cache = true;

  std::size_t channels() const { return b.size(); }
};

/// Fresh parameters: W = 0, b = 0, cache copied from the support features.
inline ZipParams init_zip_params(const SupportCache& cache) {
  ZipParams p;
  const std::size_t c = cache.channels();
  p.w = Tensor2<double>(c, c);
  p.b.assign(c, 0.0);
  p.cache_features = cache.features;
  return p;
}

/// F' = SiLU(W F + b) + F
template <typename T>
std::vector<T> zip_forward(std::span<const T> f, const Tensor2<T>& w, std::span<const T> b) {
  const std::size_t c = b.size();
  require(f.size() == c && w.rows() == c && w.cols() == c, ErrorCode::ShapeMismatch,
          "zip_forward: feature length " + std::to_string(f.size()) + ", C=" + std::to_string(c));
  std::vector<T> out(c);
  for (std::size_t r = 0; r < c; ++r) out[r] = silu(dot<T>(w.row(r), f) + b[r]) + f[r];
  return out;
}

inline std::vector<double> zip_forward(std::span<const double> f, const ZipParams& p) {
  return zip_forward<double>(f, p.w, p.b);
}

/// Keys actually compared against queries: the cache through ZIP (or as is).
inline Tensor2<double> adapted_cache(const ZipParams& p) {
  if (!p.adapt_cache) return p.cache_features;
  Tensor2<double> out(p.cache_features.rows(), p.cache_features.cols());
  for (std::size_t i = 0; i < out.rows(); ++i) {
    const auto row = zip_forward(p.cache_features.row(i), p);
    std::copy(row.begin(), row.end(), out.row(i).begin());
  }
  return out;
}

/// logits_n = sum_i psi(cos(query, cache_i); beta) * Y[i, n]
template <typename T>
std::vector<T> sdpa_logits(std::span<const T> query, const Tensor2<T>& cache, const Tensor2<T>& onehot, T beta) {
  require(cache.rows() > 0, ErrorCode::InvalidArgument, "sdpa_logits: empty cache");
  require(onehot.rows() == cache.rows(), ErrorCode::ShapeMismatch, "sdpa_logits: labels do not match cache rows");
  std::vector<T> logits(onehot.cols(), T{0});
  for (std::size_t i = 0; i < cache.rows(); ++i) {
    const T a = psi(cosine_sim<T>(query, cache.row(i)), beta);
    auto y = onehot.row(i);
    for (std::size_t n = 0; n < logits.size(); ++n) logits[n] += a * y[n];
  }
  return logits;
}

/// Zip-Adapter inference over a prepared (adapted) key set.
class ZipPredictor {
 public:
  ZipPredictor(ZipParams params, Tensor2<double> onehot, double beta)
      : params_(std::move(params)), onehot_(std::move(onehot)), beta_(beta), keys_(adapted_cache(params_)) {
    require(beta > 0.0, ErrorCode::InvalidArgument, "beta must be > 0");
  }

  std::vector<double> logits(std::span<const double> query) const {
    const auto q = zip_forward(query, params_);
    return sdpa_logits<double>(q, keys_, onehot_, beta_);
  }

  std::size_t predict(std::span<const double> query) const {
    const auto l = logits(query);
    return argmax<double>(l);
  }

  const ZipParams& params() const { return params_; }
  double beta() const { return beta_; }

 private:
  ZipParams params_;
  Tensor2<double> onehot_;
  double beta_;
  Tensor2<double> keys_;
};

}  // namespace mvrec

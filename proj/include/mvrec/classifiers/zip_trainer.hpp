#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "mvrec/adamw.hpp"
#include "mvrec/classifiers/zip_adapter.hpp"
#include "mvrec/error.hpp"
#include "mvrec/losses.hpp"
#include "mvrec/numerics.hpp"
#include "mvrec/tensor.hpp"

namespace mvrec {

struct TrainConfig {
  double beta = 1.0;
  double alpha = 0.5;
  double lambda = 4.0;
  double lr = 1e-4;
  std::size_t iterations = 500;
  std::uint64_t seed = 0;
  TripletMining mining = TripletMining::BatchHard;
  TripletDistance distance = TripletDistance::Cosine;

  void validate() const {
    require(beta > 0.0, ErrorCode::InvalidArgument, "beta must be > 0");
    require(iterations >= 1, ErrorCode::InvalidArgument, "iterations must be >= 1");
    require(lr > 0.0 && alpha >= 0.0 && lambda >= 0.0, ErrorCode::InvalidArgument,
            "lr must be > 0, alpha and lambda >= 0");
  }
};

/// Labelled training rows: every view embedding of every support instance.
struct TrainingBatch {
  Tensor2<double> features;  // (NK * V) x C
  std::vector<std::size_t> labels;
};

struct LossBreakdown {
  double ce = 0.0;
  double triplet = 0.0;
  double total = 0.0;
  std::size_t correct = 0;
  std::size_t batch = 0;

  double accuracy() const { return batch == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(batch); }
};

struct ZipGradients {
  Tensor2<double> w;
  std::vector<double> b;
  Tensor2<double> cache;
};

/// Flat parameter layout used for gradient checking: [W row-major, b, cache row-major].
inline std::vector<double> flatten(const ZipParams& p) {
  std::vector<double> out(p.w.flat().begin(), p.w.flat().end());
  out.insert(out.end(), p.b.begin(), p.b.end());
  out.insert(out.end(), p.cache_features.flat().begin(), p.cache_features.flat().end());
  return out;
}

inline std::vector<double> flatten(const ZipGradients& g) {
  std::vector<double> out(g.w.flat().begin(), g.w.flat().end());
  out.insert(out.end(), g.b.begin(), g.b.end());
  out.insert(out.end(), g.cache.flat().begin(), g.cache.flat().end());
  return out;
}

inline void unflatten(std::span<const double> flat, ZipParams& p) {
  const std::size_t nw = p.w.size(), nb = p.b.size(), nc = p.cache_features.size();
  require(flat.size() == nw + nb + nc, ErrorCode::ShapeMismatch, "unflatten: wrong parameter count");
  std::copy(flat.begin(), flat.begin() + nw, p.w.flat().begin());
  std::copy(flat.begin() + nw, flat.begin() + nw + nb, p.b.begin());
  std::copy(flat.begin() + nw + nb, flat.end(), p.cache_features.flat().begin());
}

/// The Zip-Adapter-F objective over a fixed batch:
///   mean_j CE(logits(zip(e_j)), y_j) + lambda * triplet({zip(e_j)}, y)
/// with logits_n = sum_i psi(cos(zip(e_j), key_i); beta) Y[i, n].
class ZipObjective {
 public:
  ZipObjective(std::vector<std::size_t> cache_labels, std::size_t num_classes, const TrainingBatch& batch,
               TrainConfig config)
      : cache_labels_(std::move(cache_labels)), n_(num_classes), batch_(batch), config_(config) {
    require(batch_.features.rows() == batch_.labels.size() && batch_.features.rows() > 0, ErrorCode::ShapeMismatch,
            "training batch rows and labels differ or are empty");
    for (auto l : batch_.labels)
      require(l < n_, ErrorCode::IndexOutOfRange, "batch label " + std::to_string(l) + " >= N");
    onehot_ = RowMat::Zero(static_cast<Eigen::Index>(cache_labels_.size()), static_cast<Eigen::Index>(n_));
    for (std::size_t i = 0; i < cache_labels_.size(); ++i) {
      require(cache_labels_[i] < n_, ErrorCode::IndexOutOfRange, "cache label >= N");
      onehot_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(cache_labels_[i])) = 1.0;
    }
  }

  LossBreakdown evaluate(const ZipParams& p, ZipGradients* grad = nullptr) const {
    const std::size_t bsz = batch_.features.rows(), m = p.cache_features.rows(), c = p.channels();
    require(batch_.features.cols() == c && p.cache_features.cols() == c && m == cache_labels_.size(),
            ErrorCode::ShapeMismatch, "objective: parameter shapes do not match the batch/cache");
    const RowMat e = map(batch_.features);
    const RowMat w = map(p.w);
    const RowMat s = map(p.cache_features);
    const Eigen::RowVectorXd b = Eigen::Map<const Eigen::RowVectorXd>(p.b.data(), static_cast<Eigen::Index>(c));

    // forward: q = silu(e W^T + b) + e, keys likewise (or the raw cache)
    const RowMat pre_q = (e * w.transpose()).rowwise() + b;
    const RowMat q = pre_q.unaryExpr([](double x) { return silu(x); }) + e;
    Tensor2<double> q_store(bsz, c);
    map(q_store) = q;
    RowMat pre_k, keys;
    if (p.adapt_cache) {
      pre_k = (s * w.transpose()).rowwise() + b;
      keys = pre_k.unaryExpr([](double x) { return silu(x); }) + s;
    } else {
      keys = s;
    }
    const Eigen::VectorXd nq = q.rowwise().norm();
    const Eigen::VectorXd nk = keys.rowwise().norm();
    require(nq.allFinite() && nk.allFinite(), ErrorCode::NonFiniteLoss, "adapted features are not finite");
    require(nq.minCoeff() >= kZeroNormThreshold && nk.minCoeff() >= kZeroNormThreshold, ErrorCode::ZeroVector,
            "adapted feature has zero norm");

    const RowMat inv_nn = (nq * nk.transpose()).cwiseInverse();
    const RowMat cos = (q * keys.transpose()).cwiseProduct(inv_nn).cwiseMax(-1.0).cwiseMin(1.0);
    const RowMat act = ((cos.array() - 1.0) * config_.beta).exp().matrix();
    const RowMat logits = act * onehot_;

    LossBreakdown out;
    out.batch = bsz;
    RowMat dlogits(bsz, n_);
    const double inv_b = 1.0 / static_cast<double>(bsz);
    for (std::size_t j = 0; j < bsz; ++j) {
      const auto jj = static_cast<Eigen::Index>(j);
      std::span<const double> row(logits.row(jj).data(), n_);
      const auto ce = cross_entropy_with_grad<double>(row, batch_.labels[j]);
      out.ce += ce.loss * inv_b;
      for (std::size_t n = 0; n < n_; ++n) dlogits(jj, static_cast<Eigen::Index>(n)) = ce.grad[n] * inv_b;
      if (argmax<double>(row) == batch_.labels[j]) ++out.correct;
    }

    TripletResult<double> tri;
    if (config_.lambda != 0.0)
      tri = triplet_loss<double>(q_store, batch_.labels, config_.alpha, config_.mining, config_.distance,
                                 grad != nullptr);
    out.triplet = tri.loss;
    out.total = out.ce + config_.lambda * out.triplet;
    if (grad == nullptr) return out;

    // backward through psi and the cosine:
    //   d cos(q, k) / dq = k / (|q||k|) - cos q / |q|^2
    const RowMat dcos = (dlogits * onehot_.transpose()).cwiseProduct(act) * config_.beta;
    const RowMat scaled = dcos.cwiseProduct(inv_nn);
    const Eigen::VectorXd dq_self = dcos.cwiseProduct(cos).rowwise().sum().cwiseQuotient(nq.cwiseAbs2());
    const Eigen::VectorXd dk_self = dcos.cwiseProduct(cos).colwise().sum().transpose().cwiseQuotient(nk.cwiseAbs2());
    RowMat dq = scaled * keys - dq_self.asDiagonal() * q;
    if (config_.lambda != 0.0 && !tri.grad.empty()) dq += config_.lambda * RowMat(map(tri.grad));
    const RowMat dk = scaled.transpose() * q - dk_self.asDiagonal() * keys;

    const RowMat dt_q = dq.cwiseProduct(pre_q.unaryExpr([](double x) { return silu_grad(x); }));
    RowMat gw = dt_q.transpose() * e;
    Eigen::RowVectorXd gb = dt_q.colwise().sum();
    RowMat gs;
    if (p.adapt_cache) {
      const RowMat dt_k = dk.cwiseProduct(pre_k.unaryExpr([](double x) { return silu_grad(x); }));
      gw.noalias() += dt_k.transpose() * s;
      gb += dt_k.colwise().sum();
      gs = dk + dt_k * w;
    } else {
      gs = dk;
    }
    grad->w = Tensor2<double>(c, c);
    grad->b.assign(gb.data(), gb.data() + c);
    grad->cache = Tensor2<double>(m, c);
    map(grad->w) = gw;
    map(grad->cache) = gs;
    return out;
  }

  /// Loss and flat gradient at a flat parameter vector shaped like `shape`.
  std::pair<double, std::vector<double>> value_and_grad(std::span<const double> flat, ZipParams shape) const {
    unflatten(flat, shape);
    ZipGradients g;
    const auto loss = evaluate(shape, &g);
    return {loss.total, flatten(g)};
  }

  const TrainConfig& config() const { return config_; }

 private:
  using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  static Eigen::Map<RowMat> map(Tensor2<double>& t) {
    return {t.flat().data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols())};
  }
  static Eigen::Map<const RowMat> map(const Tensor2<double>& t) {
    return {t.flat().data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols())};
  }

  std::vector<std::size_t> cache_labels_;
  std::size_t n_;
  const TrainingBatch& batch_;
  TrainConfig config_;
  RowMat onehot_;
};

struct TrainResult {
  ZipParams params;
  std::vector<LossBreakdown> trace;  // one entry per iteration, measured before its update
  LossBreakdown final;               // after the last update
  std::optional<std::size_t> first_perfect_iteration;
};

/// Fine-tunes ZIP and/or the cache with full-batch AdamW. Only parameters
/// whose trainable flag is set are updated; with both flags off the
/// parameters are returned unchanged.
inline TrainResult train_zip_adapter_f(const SupportCache& cache, const TrainingBatch& batch,
                                       const TrainConfig& config, ZipParams params) {
  config.validate();
  const ZipObjective objective(cache.labels, cache.n(), batch, config);
  TrainResult result;
  const bool trainable = params.train_cache || params.train_zip;
  if (trainable) {
    AdamWConfig opt;
    opt.lr = config.lr;
    AdamWState<double> sw(opt), sb(opt), sc(opt);
    result.trace.reserve(config.iterations);
    ZipGradients g;
    for (std::size_t it = 0; it < config.iterations; ++it) {
      const auto loss = objective.evaluate(params, &g);
      require(std::isfinite(loss.total), ErrorCode::NonFiniteLoss,
              "iteration=" + std::to_string(it) + " ce=" + std::to_string(loss.ce) +
                  " triplet=" + std::to_string(loss.triplet));
      if (!result.first_perfect_iteration && loss.correct == loss.batch) result.first_perfect_iteration = it;
      result.trace.push_back(loss);
      if (params.train_zip) {
        adamw_step<double>(params.w.flat(), g.w.flat(), sw);
        adamw_step<double>(params.b, g.b, sb);
      }
      if (params.train_cache) adamw_step<double>(params.cache_features.flat(), g.cache.flat(), sc);
    }
  }
  result.final = objective.evaluate(params);
  require(std::isfinite(result.final.total), ErrorCode::NonFiniteLoss,
          "final evaluation ce=" + std::to_string(result.final.ce));
  if (!result.first_perfect_iteration && result.final.correct == result.final.batch)
    result.first_perfect_iteration = result.trace.size();
  result.params = std::move(params);
  return result;
}

inline TrainResult train_zip_adapter_f(const SupportCache& cache, const TrainingBatch& batch,
                                       const TrainConfig& config) {
  return train_zip_adapter_f(cache, batch, config, init_zip_params(cache));
}

}  // namespace mvrec

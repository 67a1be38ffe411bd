#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "mvrec/adamw.hpp"
#include "mvrec/classifiers/zip_adapter.hpp"
#include "mvrec/classifiers/zip_trainer.hpp"
#include "mvrec/error.hpp"
#include "mvrec/losses.hpp"
#include "mvrec/numerics.hpp"
#include "mvrec/rng.hpp"
#include "mvrec/tensor.hpp"

namespace mvrec {

/// 1-NN by cosine: logits_n = max over class-n support rows of cos(query, row).
inline std::vector<double> knn_logits(std::span<const double> query, const SupportCache& cache) {
  std::vector<double> logits(cache.n(), -2.0);
  for (std::size_t i = 0; i < cache.size(); ++i) {
    const double s = cosine_sim<double>(query, cache.features.row(i));
    logits[cache.labels[i]] = std::max(logits[cache.labels[i]], s);
  }
  return logits;
}

/// Per-class mean of the support features, one row per class.
inline Tensor2<double> class_prototypes(const Tensor2<double>& features, std::span<const std::size_t> labels,
                                        std::size_t n) {
  Tensor2<double> protos(n, features.cols());
  std::vector<std::size_t> count(n, 0);
  for (std::size_t i = 0; i < features.rows(); ++i) {
    auto dst = protos.row(labels[i]);
    auto src = features.row(i);
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
    ++count[labels[i]];
  }
  for (std::size_t c = 0; c < n; ++c) {
    require(count[c] > 0, ErrorCode::InvalidArgument, "class without support rows");
    for (auto& v : protos.row(c)) v /= static_cast<double>(count[c]);
  }
  return protos;
}

inline std::vector<double> prototype_logits(std::span<const double> query, const Tensor2<double>& protos) {
  std::vector<double> logits(protos.rows());
  for (std::size_t c = 0; c < protos.rows(); ++c) logits[c] = cosine_sim<double>(query, protos.row(c));
  return logits;
}

/// Settings shared by the gradient-trained baselines.
struct BaselineTrainConfig {
  double lr = 1e-4;
  std::size_t iterations = 500;
  std::uint64_t seed = 0;
};

// ---------------------------------------------------------------------------
// Linear probe: softmax(W x/|x| + b), trained by mean cross-entropy.

struct LinearProbeParams {
  Tensor2<double> w;  // N x C
  std::vector<double> b;
};

inline std::vector<double> linear_probe_logits(std::span<const double> x, const LinearProbeParams& p) {
  const double nx = norm(x);
  require(nx >= kZeroNormThreshold, ErrorCode::ZeroVector, "linear probe input has zero norm");
  std::vector<double> logits(p.b);
  for (std::size_t n = 0; n < logits.size(); ++n) logits[n] += dot<double>(p.w.row(n), x) / nx;
  return logits;
}

/// Mean CE over the batch; fills gradients when `grad` is given.
inline double linear_probe_loss(const LinearProbeParams& p, const TrainingBatch& batch, LinearProbeParams* grad) {
  const std::size_t bsz = batch.features.rows(), n = p.b.size(), c = p.w.cols();
  if (grad) {
    grad->w = Tensor2<double>(n, c);
    grad->b.assign(n, 0.0);
  }
  const double inv_b = 1.0 / static_cast<double>(bsz);
  double loss = 0.0;
  for (std::size_t j = 0; j < bsz; ++j) {
    auto x = batch.features.row(j);
    const auto logits = linear_probe_logits(x, p);
    const auto ce = cross_entropy_with_grad<double>(logits, batch.labels[j]);
    loss += ce.loss * inv_b;
    if (!grad) continue;
    const double nx = norm(x);
    for (std::size_t k = 0; k < n; ++k) {
      const double g = ce.grad[k] * inv_b;
      if (g == 0.0) continue;
      grad->b[k] += g;
      auto wr = grad->w.row(k);
      for (std::size_t d = 0; d < c; ++d) wr[d] += g * x[d] / nx;
    }
  }
  return loss;
}

inline LinearProbeParams train_linear_probe(const TrainingBatch& batch, std::size_t num_classes,
                                            const BaselineTrainConfig& cfg) {
  require(batch.features.rows() > 0, ErrorCode::InvalidArgument, "linear probe: empty batch");
  LinearProbeParams p{Tensor2<double>(num_classes, batch.features.cols()), std::vector<double>(num_classes, 0.0)};
  AdamWConfig opt;
  opt.lr = cfg.lr;
  AdamWState<double> sw(opt), sb(opt);
  LinearProbeParams g;
  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    const double loss = linear_probe_loss(p, batch, &g);
    require(std::isfinite(loss), ErrorCode::NonFiniteLoss, "linear probe iteration=" + std::to_string(it));
    adamw_step<double>(p.w.flat(), g.w.flat(), sw);
    adamw_step<double>(p.b, g.b, sb);
  }
  return p;
}

// ---------------------------------------------------------------------------
// Visual-only CLIP-Adapter: x' = blend * relu(W2 relu(W1 x)) + (1 - blend) x,
// logits_n = scale * cos(x', prototype_n), prototypes fixed at the class
// means of the support features.

struct ClipAdapterConfig {
  std::size_t reduction = 4;
  double blend = 0.2;
  double logit_scale = 100.0;
};

struct ClipAdapterParams {
  Tensor2<double> w1;  // H x C
  Tensor2<double> w2;  // C x H
};

inline ClipAdapterParams init_clip_adapter(std::size_t channels, const ClipAdapterConfig& cfg, std::uint64_t seed) {
  require(cfg.reduction >= 1, ErrorCode::InvalidArgument, "reduction must be >= 1");
  const std::size_t hidden = std::max<std::size_t>(1, channels / cfg.reduction);
  ClipAdapterParams p{Tensor2<double>(hidden, channels), Tensor2<double>(channels, hidden)};
  Rng rng(mix_seed(seed, fnv1a("clip_adapter")));
  const double b1 = 1.0 / std::sqrt(static_cast<double>(channels));
  const double b2 = 1.0 / std::sqrt(static_cast<double>(hidden));
  for (auto& v : p.w1.flat()) v = (2.0 * rng.uniform() - 1.0) * b1;
  for (auto& v : p.w2.flat()) v = (2.0 * rng.uniform() - 1.0) * b2;
  return p;
}

namespace detail {

struct ClipAdapterForward {
  std::vector<double> pre_h, h, pre_a, out;
};

inline ClipAdapterForward clip_adapter_forward(std::span<const double> x, const ClipAdapterParams& p,
                                               const ClipAdapterConfig& cfg) {
  ClipAdapterForward f;
  const std::size_t hidden = p.w1.rows(), c = p.w2.rows();
  require(x.size() == c && p.w1.cols() == c, ErrorCode::ShapeMismatch, "clip adapter: feature length mismatch");
  f.pre_h.resize(hidden);
  f.h.resize(hidden);
  for (std::size_t r = 0; r < hidden; ++r) {
    f.pre_h[r] = dot<double>(p.w1.row(r), x);
    f.h[r] = std::max(f.pre_h[r], 0.0);
  }
  f.pre_a.resize(c);
  f.out.resize(c);
  for (std::size_t r = 0; r < c; ++r) {
    f.pre_a[r] = dot<double>(p.w2.row(r), f.h);
    f.out[r] = cfg.blend * std::max(f.pre_a[r], 0.0) + (1.0 - cfg.blend) * x[r];
  }
  return f;
}

}  // namespace detail

inline std::vector<double> clip_adapter_logits(std::span<const double> x, const ClipAdapterParams& p,
                                               const Tensor2<double>& protos, const ClipAdapterConfig& cfg) {
  const auto f = detail::clip_adapter_forward(x, p, cfg);
  auto logits = prototype_logits(f.out, protos);
  for (auto& v : logits) v *= cfg.logit_scale;
  return logits;
}

inline double clip_adapter_loss(const ClipAdapterParams& p, const Tensor2<double>& protos, const TrainingBatch& batch,
                                const ClipAdapterConfig& cfg, ClipAdapterParams* grad) {
  const std::size_t bsz = batch.features.rows(), hidden = p.w1.rows(), c = p.w2.rows(), n = protos.rows();
  if (grad) {
    grad->w1 = Tensor2<double>(hidden, c);
    grad->w2 = Tensor2<double>(c, hidden);
  }
  std::vector<double> proto_norm(n);
  for (std::size_t k = 0; k < n; ++k) proto_norm[k] = norm(protos.row(k));
  const double inv_b = 1.0 / static_cast<double>(bsz);
  double loss = 0.0;
  std::vector<double> dout(c), da(c), dh(hidden), logits(n);
  for (std::size_t j = 0; j < bsz; ++j) {
    auto x = batch.features.row(j);
    const auto f = detail::clip_adapter_forward(x, p, cfg);
    const double no = norm<double>(f.out);
    require(std::isfinite(no), ErrorCode::NonFiniteLoss, "adapted feature is not finite");
    require(no >= kZeroNormThreshold, ErrorCode::ZeroVector, "adapted feature has zero norm");
    std::vector<double> cos(n);
    for (std::size_t k = 0; k < n; ++k) {
      cos[k] = std::clamp(dot<double>(f.out, protos.row(k)) / (no * proto_norm[k]), -1.0, 1.0);
      logits[k] = cfg.logit_scale * cos[k];
    }
    const auto ce = cross_entropy_with_grad<double>(logits, batch.labels[j]);
    loss += ce.loss * inv_b;
    if (!grad) continue;
    std::fill(dout.begin(), dout.end(), 0.0);
    for (std::size_t k = 0; k < n; ++k) {
      const double s = ce.grad[k] * inv_b * cfg.logit_scale;
      if (s != 0.0) accumulate_cosine_grad<double>(f.out, protos.row(k), no, proto_norm[k], cos[k], s, dout);
    }
    for (std::size_t r = 0; r < c; ++r) da[r] = f.pre_a[r] > 0.0 ? cfg.blend * dout[r] : 0.0;
    std::fill(dh.begin(), dh.end(), 0.0);
    for (std::size_t r = 0; r < c; ++r) {
      if (da[r] == 0.0) continue;
      auto g2 = grad->w2.row(r);
      auto w2 = p.w2.row(r);
      for (std::size_t h = 0; h < hidden; ++h) {
        g2[h] += da[r] * f.h[h];
        dh[h] += w2[h] * da[r];
      }
    }
    for (std::size_t h = 0; h < hidden; ++h) {
      if (f.pre_h[h] <= 0.0 || dh[h] == 0.0) continue;
      auto g1 = grad->w1.row(h);
      for (std::size_t d = 0; d < c; ++d) g1[d] += dh[h] * x[d];
    }
  }
  return loss;
}

inline ClipAdapterParams train_clip_adapter(const TrainingBatch& batch, const Tensor2<double>& protos,
                                            const ClipAdapterConfig& cfg, const BaselineTrainConfig& train) {
  require(batch.features.rows() > 0, ErrorCode::InvalidArgument, "clip adapter: empty batch");
  auto p = init_clip_adapter(batch.features.cols(), cfg, train.seed);
  AdamWConfig opt;
  opt.lr = train.lr;
  AdamWState<double> s1(opt), s2(opt);
  ClipAdapterParams g;
  for (std::size_t it = 0; it < train.iterations; ++it) {
    const double loss = clip_adapter_loss(p, protos, batch, cfg, &g);
    require(std::isfinite(loss), ErrorCode::NonFiniteLoss, "clip adapter iteration=" + std::to_string(it));
    adamw_step<double>(p.w1.flat(), g.w1.flat(), s1);
    adamw_step<double>(p.w2.flat(), g.w2.flat(), s2);
  }
  return p;
}

}  // namespace mvrec

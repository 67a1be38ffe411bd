#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mvrec/error.hpp"
#include "mvrec/numerics.hpp"
#include "mvrec/tensor.hpp"

namespace mvrec {

inline constexpr double kProbabilityFloor = 1e-12;

template <typename T>
std::vector<T> softmax(std::span<const T> logits) {
  const T peak = *std::max_element(logits.begin(), logits.end());
  std::vector<T> p(logits.size());
  T total{0};
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - peak);
    total += p[i];
  }
  for (auto& v : p) v /= total;
  return p;
}

template <typename T>
struct CrossEntropyResult {
  T loss{0};
  std::vector<T> grad;  // d loss / d logits
};

/// -log softmax(logits)[label], with the probability floored at 1e-12.
/// When the floor is active the loss is locally constant and the gradient is zero.
template <typename T>
CrossEntropyResult<T> cross_entropy_with_grad(std::span<const T> logits, std::size_t label) {
  require(logits.size() >= 2, ErrorCode::InvalidArgument, "cross_entropy needs at least 2 classes");
  require(label < logits.size(), ErrorCode::IndexOutOfRange,
          "label " + std::to_string(label) + " >= " + std::to_string(logits.size()));
  CrossEntropyResult<T> out;
  out.grad = softmax(logits);
  const T p = out.grad[label];
  if (p < T(kProbabilityFloor)) {
    out.loss = -std::log(T(kProbabilityFloor));
    std::fill(out.grad.begin(), out.grad.end(), T{0});
    return out;
  }
  out.loss = -std::log(p);
  out.grad[label] -= T{1};
  return out;
}

template <typename T>
T cross_entropy(std::span<const T> logits, std::size_t label) {
  return cross_entropy_with_grad(logits, label).loss;
}

enum class TripletMining { BatchHard, BatchAll };
enum class TripletDistance { Cosine, SquaredEuclidean };

template <typename T>
struct TripletResult {
  T loss{0};
  /// True when the batch holds no (anchor, positive, negative) triple; the
  /// loss term is then inactive rather than failed.
  bool degenerate = true;
  std::size_t valid_anchors = 0;
  Tensor2<T> grad;  // d loss / d features, filled when requested
};

namespace detail {

template <typename T>
class PairDistances {
 public:
  PairDistances(const Tensor2<T>& x, TripletDistance kind) : x_(x), kind_(kind), n_(x.rows()) {
    const std::size_t c = x.cols();
    if (kind_ == TripletDistance::Cosine) {
      inv_norm_.resize(n_);
      unit_ = Tensor2<T>(n_, c);
      for (std::size_t i = 0; i < n_; ++i) {
        const T nr = norm(x.row(i));
        require(nr >= T(kZeroNormThreshold), ErrorCode::ZeroVector, "triplet feature has zero norm");
        inv_norm_[i] = T{1} / nr;
        auto src = x.row(i);
        auto dst = unit_.row(i);
        for (std::size_t k = 0; k < c; ++k) dst[k] = src[k] * inv_norm_[i];
      }
    }
    dist_.assign(n_ * n_, T{0});
    using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    Eigen::Map<RowMat> d(dist_.data(), static_cast<Eigen::Index>(n_), static_cast<Eigen::Index>(n_));
    if (kind_ == TripletDistance::Cosine) {
      const RowMat u = Eigen::Map<const RowMat>(unit_.data().data(), static_cast<Eigen::Index>(n_),
                                                static_cast<Eigen::Index>(c));
      d = u * u.transpose();
      d = (T{1} - d.array().min(T{1}).max(T{-1})).matrix();
    } else {
      const RowMat m = Eigen::Map<const RowMat>(x.data().data(), static_cast<Eigen::Index>(n_),
                                                static_cast<Eigen::Index>(c));
      const auto sq = m.rowwise().squaredNorm().eval();
      d = m * m.transpose();
      d = ((-T{2} * d).colwise() + sq).rowwise() + sq.transpose();
      d = d.array().max(T{0}).matrix();
    }
    for (std::size_t i = 0; i < n_; ++i) dist_[i * n_ + i] = T{0};
  }

  T operator()(std::size_t i, std::size_t j) const { return dist_[i * n_ + j]; }
  const T* row(std::size_t i) const { return dist_.data() + i * n_; }

  /// grad[i] += scale * d dist(i, j) / d x_i
  void accumulate(std::size_t i, std::size_t j, T scale, Tensor2<T>& grad) const {
    auto g = grad.row(i);
    const std::size_t c = x_.cols();
    if (kind_ == TripletDistance::Cosine) {
      // d(1 - u_i.u_j)/dx_i = -(u_j - cos u_i) / |x_i|
      const T cos = T{1} - dist_[i * n_ + j];
      auto ui = unit_.row(i);
      auto uj = unit_.row(j);
      const T s = -scale * inv_norm_[i];
      for (std::size_t k = 0; k < c; ++k) g[k] += s * (uj[k] - cos * ui[k]);
    } else {
      auto a = x_.row(i);
      auto b = x_.row(j);
      for (std::size_t k = 0; k < c; ++k) g[k] += scale * T{2} * (a[k] - b[k]);
    }
  }

 private:
  const Tensor2<T>& x_;
  TripletDistance kind_;
  std::size_t n_;
  Tensor2<T> unit_;
  std::vector<T> inv_norm_;
  std::vector<T> dist_;
};

}  // namespace detail

/// Hinge for one explicit (anchor, positive, negative) triple.
template <typename T>
T triplet_term(std::span<const T> anchor, std::span<const T> positive, std::span<const T> negative,
               T alpha, TripletDistance distance = TripletDistance::Cosine) {
  auto d = [distance](std::span<const T> x, std::span<const T> y) {
    if (distance == TripletDistance::Cosine) return T{1} - cosine_sim(x, y);
    T s{0};
    for (std::size_t k = 0; k < x.size(); ++k) s += (x[k] - y[k]) * (x[k] - y[k]);
    return s;
  };
  return std::max(d(anchor, positive) - d(anchor, negative) + alpha, T{0});
}

/// Triplet margin loss over a labelled batch.
///
/// BatchHard: for every anchor with at least one positive and one negative,
/// take the farthest positive and the nearest negative and average
/// max(d(a,p) - d(a,n) + alpha, 0) over those anchors. Ties in the mining
/// step go to the lowest row index.
/// BatchAll: average the hinge over every valid (a, p, n) triple.
template <typename T>
TripletResult<T> triplet_loss(const Tensor2<T>& features, std::span<const std::size_t> labels,
                              T alpha, TripletMining mining = TripletMining::BatchHard,
                              TripletDistance distance = TripletDistance::Cosine,
                              bool with_grad = false) {
  require(labels.size() == features.rows(), ErrorCode::ShapeMismatch,
          "triplet_loss: labels do not match batch size");
  const std::size_t n = features.rows();
  TripletResult<T> out;
  if (with_grad) out.grad = Tensor2<T>(n, features.cols());
  if (n < 3) return out;

  detail::PairDistances<T> dist(features, distance);

  if (mining == TripletMining::BatchHard) {
    struct Active {
      std::size_t a, p, neg;
    };
    std::vector<Active> active;
    T total{0};
    const T inf = std::numeric_limits<T>::infinity();
    for (std::size_t a = 0; a < n; ++a) {
      const std::size_t la = labels[a];
      const T* row = dist.row(a);
      T far_pos = -inf, near_neg = inf;
      for (std::size_t j = 0; j < n; ++j) {
        const bool same = labels[j] == la;
        const T d = row[j];
        far_pos = (same && j != a && d > far_pos) ? d : far_pos;
        near_neg = (!same && d < near_neg) ? d : near_neg;
      }
      std::size_t hard_pos = n, hard_neg = n;
      if (far_pos != -inf) {
        for (std::size_t j = 0; j < n && (hard_pos == n || hard_neg == n); ++j) {
          const bool same = labels[j] == la;
          if (hard_pos == n && same && j != a && row[j] == far_pos) hard_pos = j;
          if (hard_neg == n && !same && row[j] == near_neg) hard_neg = j;
        }
      }
      if (hard_pos == n || hard_neg == n) continue;
      ++out.valid_anchors;
      const T hinge = dist(a, hard_pos) - dist(a, hard_neg) + alpha;
      if (hinge > T{0}) {
        total += hinge;
        active.push_back({a, hard_pos, hard_neg});
      }
    }
    if (out.valid_anchors == 0) return out;
    out.degenerate = false;
    const T inv = T{1} / static_cast<T>(out.valid_anchors);
    out.loss = total * inv;
    if (with_grad) {
      for (const auto& t : active) {
        dist.accumulate(t.a, t.p, inv, out.grad);
        dist.accumulate(t.p, t.a, inv, out.grad);
        dist.accumulate(t.a, t.neg, -inv, out.grad);
        dist.accumulate(t.neg, t.a, -inv, out.grad);
      }
    }
    return out;
  }

  std::size_t triples = 0;
  T total{0};
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t p = 0; p < n; ++p) {
      if (p == a || labels[p] != labels[a]) continue;
      for (std::size_t q = 0; q < n; ++q) {
        if (labels[q] == labels[a]) continue;
        ++triples;
        total += std::max(dist(a, p) - dist(a, q) + alpha, T{0});
      }
    }
  }
  if (triples == 0) return out;
  out.degenerate = false;
  out.valid_anchors = n;
  const T inv = T{1} / static_cast<T>(triples);
  out.loss = total * inv;
  if (with_grad) {
    for (std::size_t a = 0; a < n; ++a) {
      for (std::size_t p = 0; p < n; ++p) {
        if (p == a || labels[p] != labels[a]) continue;
        for (std::size_t q = 0; q < n; ++q) {
          if (labels[q] == labels[a]) continue;
          if (dist(a, p) - dist(a, q) + alpha <= T{0}) continue;
          dist.accumulate(a, p, inv, out.grad);
          dist.accumulate(p, a, inv, out.grad);
          dist.accumulate(a, q, -inv, out.grad);
          dist.accumulate(q, a, -inv, out.grad);
        }
      }
    }
  }
  return out;
}

}  // namespace mvrec

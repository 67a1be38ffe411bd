#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "mvrec/error.hpp"

namespace mvrec {

/// Dense row-major matrix. Rows are the natural unit throughout the library
/// (one embedding per row), so row access returns a contiguous span.
template <typename T>
class Tensor2 {
 public:
  using value_type = T;

  Tensor2() = default;
  Tensor2(std::size_t rows, std::size_t cols, T fill = T{0})
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Tensor2(std::size_t rows, std::size_t cols, std::vector<T> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    require(data_.size() == rows_ * cols_, ErrorCode::ShapeMismatch,
            "tensor data length " + std::to_string(data_.size()) + " != " +
                std::to_string(rows_) + "x" + std::to_string(cols_));
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  const T& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<T> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const T> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<T> flat() noexcept { return data_; }
  std::span<const T> flat() const noexcept { return data_; }
  const std::vector<T>& data() const noexcept { return data_; }

  void fill(T value) { std::fill(data_.begin(), data_.end(), value); }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
  }

  template <typename U>
  Tensor2<U> cast() const {
    return Tensor2<U>(rows_, cols_, std::vector<U>(data_.begin(), data_.end()));
  }

  friend bool operator==(const Tensor2&, const Tensor2&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

template <typename T>
T dot(std::span<const T> a, std::span<const T> b) {
  T acc{0};
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

template <typename T>
T norm(std::span<const T> a) {
  return std::sqrt(dot(a, a));
}

/// out = M * x  (M is rows x cols, x has cols entries)
template <typename T>
void matvec(const Tensor2<T>& m, std::span<const T> x, std::span<T> out) {
  for (std::size_t r = 0; r < m.rows(); ++r) out[r] = dot<T>(m.row(r), x);
}

/// Column means of a matrix.
template <typename T>
std::vector<T> column_mean(const Tensor2<T>& m) {
  std::vector<T> mean(m.cols(), T{0});
  if (m.rows() == 0) return mean;
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    for (std::size_t c = 0; c < m.cols(); ++c) mean[c] += row[c];
  }
  for (auto& v : mean) v /= static_cast<T>(m.rows());
  return mean;
}

template <typename T>
std::vector<T> normalized(std::span<const T> a) {
  const T n = norm(a);
  std::vector<T> out(a.begin(), a.end());
  if (n > T{0}) {
    for (auto& v : out) v /= n;
  }
  return out;
}

}  // namespace mvrec

#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mvrec/error.hpp"

namespace mvrec {

struct ImageSize {
  int width = 0;
  int height = 0;

  friend bool operator==(const ImageSize&, const ImageSize&) = default;
};

/// Axis-aligned pixel rectangle; covers [x, x + w) x [y, y + h).
struct Rect {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;

  int right() const noexcept { return x + w; }
  int bottom() const noexcept { return y + h; }
  long long area() const noexcept { return static_cast<long long>(w) * h; }

  bool contains(double px, double py) const noexcept {
    return px >= x && px < right() && py >= y && py < bottom();
  }
  bool inside(ImageSize size) const noexcept {
    return x >= 0 && y >= 0 && right() <= size.width && bottom() <= size.height;
  }
  bool intersects(const Rect& o) const noexcept {
    return x < o.right() && o.x < right() && y < o.bottom() && o.y < bottom();
  }

  friend bool operator==(const Rect&, const Rect&) = default;
};

/// Interleaved 8-bit raster, row-major, `channels` samples per pixel.
template <typename T = std::uint8_t>
class Raster {
 public:
  Raster() = default;
  Raster(int width, int height, int channels = 1, T fill = T{0})
      : width_(width), height_(height), channels_(channels),
        data_(static_cast<std::size_t>(width) * height * channels, fill) {
    require(width >= 0 && height >= 0 && channels >= 1, ErrorCode::InvalidArgument,
            "raster dimensions must be non-negative");
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  int channels() const noexcept { return channels_; }
  ImageSize size() const noexcept { return {width_, height_}; }
  bool empty() const noexcept { return data_.empty(); }

  T& at(int x, int y, int c = 0) { return data_[index(x, y, c)]; }
  const T& at(int x, int y, int c = 0) const { return data_[index(x, y, c)]; }

  std::span<T> pixels() noexcept { return data_; }
  std::span<const T> pixels() const noexcept { return data_; }

  friend bool operator==(const Raster&, const Raster&) = default;

 private:
  std::size_t index(int x, int y, int c) const noexcept {
    return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
  }

  int width_ = 0;
  int height_ = 0;
  int channels_ = 1;
  std::vector<T> data_;
};

using Image = Raster<std::uint8_t>;
using Mask = Raster<std::uint8_t>;  // single channel, nonzero = set

inline long long count_set(const Mask& mask) {
  return std::count_if(mask.pixels().begin(), mask.pixels().end(),
                       [](std::uint8_t v) { return v != 0; });
}

}  // namespace mvrec

#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "mvrec/error.hpp"
#include "mvrec/raster.hpp"

namespace mvrec {

/// Run-length encoded binary mask in image coordinates.
///
/// Pixels are visited row-major. `runs` alternates unset/set lengths and
/// always starts with an unset run (which may be 0). The text form is the
/// run lengths in decimal ASCII separated by single spaces, e.g. "3 2 5".
struct RleMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint32_t> runs;

  friend bool operator==(const RleMask&, const RleMask&) = default;
};

inline RleMask rle_encode(const Mask& mask) {
  RleMask rle{mask.width(), mask.height(), {}};
  bool current = false;
  std::uint32_t length = 0;
  for (std::uint8_t v : mask.pixels()) {
    const bool set = v != 0;
    if (set != current) {
      rle.runs.push_back(length);
      length = 0;
      current = set;
    }
    ++length;
  }
  rle.runs.push_back(length);
  return rle;
}

/// Calls fn(x, y) for every set pixel, in raster order.
template <typename Fn>
void for_each_set_pixel(const RleMask& rle, Fn&& fn) {
  std::size_t pos = 0;
  bool set = false;
  for (std::uint32_t run : rle.runs) {
    if (set) {
      for (std::size_t i = pos; i < pos + run; ++i) {
        fn(static_cast<int>(i % rle.width), static_cast<int>(i / rle.width));
      }
    }
    pos += run;
    set = !set;
  }
}

inline Mask rle_decode(const RleMask& rle) {
  Mask mask(rle.width, rle.height);
  std::size_t total = 0;
  for (auto r : rle.runs) total += r;
  require(total == static_cast<std::size_t>(rle.width) * rle.height, ErrorCode::CorruptFile,
          "RLE covers " + std::to_string(total) + " pixels, image has " +
              std::to_string(static_cast<std::size_t>(rle.width) * rle.height));
  for_each_set_pixel(rle, [&](int x, int y) { mask.at(x, y) = 1; });
  return mask;
}

inline std::string rle_to_string(const RleMask& rle) {
  std::string out;
  for (std::size_t i = 0; i < rle.runs.size(); ++i) {
    if (i) out.push_back(' ');
    out += std::to_string(rle.runs[i]);
  }
  return out;
}

inline RleMask rle_from_string(std::string_view text, int width, int height) {
  RleMask rle{width, height, {}};
  const char* p = text.data();
  const char* end = p + text.size();
  while (p < end) {
    std::uint32_t v = 0;
    auto [next, ec] = std::from_chars(p, end, v);
    require(ec == std::errc{}, ErrorCode::CorruptFile, "bad RLE token in \"" + std::string(text) + "\"");
    rle.runs.push_back(v);
    p = next;
    if (p < end) {
      require(*p == ' ', ErrorCode::CorruptFile, "RLE runs must be separated by single spaces");
      ++p;
    }
  }
  std::size_t total = 0;
  for (auto r : rle.runs) total += r;
  require(total == static_cast<std::size_t>(width) * height, ErrorCode::CorruptFile,
          "RLE length does not match image size");
  return rle;
}

struct MaskStats {
  long long area = 0;
  Rect bbox;
  double centroid_x = 0.0;  // pixel-centre coordinates
  double centroid_y = 0.0;
};

inline MaskStats mask_stats(const RleMask& rle) {
  MaskStats s;
  int x0 = rle.width, y0 = rle.height, x1 = -1, y1 = -1;
  double sx = 0.0, sy = 0.0;
  for_each_set_pixel(rle, [&](int x, int y) {
    ++s.area;
    x0 = std::min(x0, x);
    y0 = std::min(y0, y);
    x1 = std::max(x1, x);
    y1 = std::max(y1, y);
    sx += x + 0.5;
    sy += y + 0.5;
  });
  if (s.area > 0) {
    s.bbox = Rect{x0, y0, x1 - x0 + 1, y1 - y0 + 1};
    s.centroid_x = sx / static_cast<double>(s.area);
    s.centroid_y = sy / static_cast<double>(s.area);
  }
  return s;
}

}  // namespace mvrec

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mvrec/dataset.hpp"
#include "mvrec/error.hpp"
#include "mvrec/raster.hpp"
#include "mvrec/rle.hpp"

namespace mvrec {

enum class Flip { None, Horizontal };
enum class MaskMode { Instance, FullForeground, None };

inline std::string_view to_string(Flip f) { return f == Flip::None ? "none" : "horizontal"; }
inline std::string_view to_string(MaskMode m) {
  switch (m) {
    case MaskMode::Instance: return "instance";
    case MaskMode::FullForeground: return "full_foreground";
    case MaskMode::None: return "none";
  }
  return "none";
}
inline Flip parse_flip(std::string_view s) {
  if (s == "none") return Flip::None;
  if (s == "horizontal") return Flip::Horizontal;
  fail(ErrorCode::InvalidArgument, "unknown flip '" + std::string(s) + "'");
}
inline MaskMode parse_mask_mode(std::string_view s) {
  if (s == "instance") return MaskMode::Instance;
  if (s == "full_foreground") return MaskMode::FullForeground;
  if (s == "none") return MaskMode::None;
  fail(ErrorCode::InvalidArgument, "unknown mask_mode '" + std::string(s) + "'");
}

/// One augmented crop of a defect instance.
struct ViewSpec {
  std::string instance_id;
  int view_id = 0;
  Rect crop;  // square, inside the image
  int scale_index = 0;
  int offset_index = 0;
  int rotation = 0;  // counter-clockwise degrees: 0, 90, 180, 270
  Flip flip = Flip::None;
  MaskMode mask_mode = MaskMode::Instance;

  friend bool operator==(const ViewSpec&, const ViewSpec&) = default;
};

struct AugmentConfig {
  int num_scale = 3;
  int num_offset = 9;  // 1 or 9 (3x3 grid)
  std::vector<double> scale_factors = {1.0, 1.5, 2.0};
  double offset_fraction = 1.0 / 8.0;      // offset step as a fraction of the crop side
  double base_crop_fraction = 1.0 / 3.0;   // base crop side as a fraction of min(H, W)
  bool enable_rotation = false;
  bool enable_flip = false;
  MaskMode mask_mode = MaskMode::Instance;

  int views_per_instance() const {
    return num_scale * num_offset * (enable_rotation ? 4 : 1) * (enable_flip ? 2 : 1);
  }

  void validate() const {
    require(num_scale >= 1, ErrorCode::InvalidArgument, "num_scale must be >= 1");
    require(static_cast<int>(scale_factors.size()) >= num_scale, ErrorCode::InvalidArgument,
            "need at least num_scale scale factors");
    require(num_offset == 1 || num_offset == 9, ErrorCode::InvalidArgument, "num_offset must be 1 or 9");
    for (double f : scale_factors) require(f > 0.0, ErrorCode::InvalidArgument, "scale factors must be > 0");
    require(offset_fraction >= 0.0 && offset_fraction < 0.5, ErrorCode::InvalidArgument,
            "offset_fraction must be in [0, 0.5)");
    require(base_crop_fraction > 0.0 && base_crop_fraction <= 1.0, ErrorCode::InvalidArgument,
            "base_crop_fraction must be in (0, 1]");
  }
};

inline int round_half_up(double v) { return static_cast<int>(std::floor(v + 0.5)); }

/// Crop side for a scale index: round(base_crop_fraction * min(H, W) * factor),
/// limited to [1, min(H, W)].
inline int crop_side(ImageSize image, const AugmentConfig& config, int scale_index) {
  const int min_side = std::min(image.width, image.height);
  const int base = std::max(1, round_half_up(config.base_crop_fraction * min_side));
  return std::clamp(round_half_up(base * config.scale_factors[scale_index]), 1, min_side);
}

/// Offsets of the 3x3 grid in row-major order (dy outer, dx inner).
inline std::vector<std::pair<int, int>> offset_grid(int num_offset, int delta) {
  if (num_offset == 1) return {{0, 0}};
  std::vector<std::pair<int, int>> out;
  for (int dy : {-delta, 0, delta})
    for (int dx : {-delta, 0, delta}) out.emplace_back(dx, dy);
  return out;
}

/// Square crop of side `side` centred on (cx, cy), before clamping.
inline Rect centered_crop(double cx, double cy, int side) {
  return Rect{static_cast<int>(std::floor(cx - side / 2.0 + 0.5)),
              static_cast<int>(std::floor(cy - side / 2.0 + 0.5)), side, side};
}

/// Translates a crop so it lies inside the image (crop side <= image side).
inline Rect clamp_into(Rect r, ImageSize image) {
  r.x = std::clamp(r.x, 0, image.width - r.w);
  r.y = std::clamp(r.y, 0, image.height - r.h);
  return r;
}

/// Multi-scale x multi-offset (x rotation x flip) views of one instance.
///
/// Every crop is centred on the mask centroid shifted by the offset grid
/// (delta = round(side * offset_fraction)), then translated into the image.
/// Views are numbered 0..V-1 in order scale, offset, rotation, flip.
inline std::vector<ViewSpec> generate_views(const DefectInstance& instance, ImageSize image,
                                            const AugmentConfig& config) {
  config.validate();
  require(image.width > 0 && image.height > 0, ErrorCode::InvalidArgument, "image size must be positive");
  const MaskStats stats = mask_stats(instance.mask);
  require(stats.area > 0, ErrorCode::EmptyInstance, instance.instance_id + " has an empty mask");

  std::vector<int> rotations = {0};
  if (config.enable_rotation) rotations = {0, 90, 180, 270};
  std::vector<Flip> flips = {Flip::None};
  if (config.enable_flip) flips = {Flip::None, Flip::Horizontal};

  std::vector<ViewSpec> views;
  views.reserve(config.views_per_instance());
  for (int s = 0; s < config.num_scale; ++s) {
    const int side = crop_side(image, config, s);
    const int delta = round_half_up(side * config.offset_fraction);
    const auto grid = offset_grid(config.num_offset, delta);
    for (int o = 0; o < static_cast<int>(grid.size()); ++o) {
      const Rect crop = clamp_into(
          centered_crop(stats.centroid_x + grid[o].first, stats.centroid_y + grid[o].second, side), image);
      for (int rot : rotations) {
        for (Flip flip : flips) {
          views.push_back(ViewSpec{instance.instance_id, static_cast<int>(views.size()), crop, s, o, rot,
                                   flip, config.mask_mode});
        }
      }
    }
  }
  return views;
}

inline std::vector<ViewSpec> generate_views(const DefectInstance& instance, const AugmentConfig& config) {
  return generate_views(instance, instance.image_size(), config);
}

/// The eight augmentation combinations compared in the ablation, in report order.
inline const std::array<std::string_view, 8> kAblationViewSets = {
    "none", "scale", "rotate", "flip", "offset", "scale+rotate", "scale+flip", "scale+offset"};

inline AugmentConfig ablation_config(std::string_view name, const AugmentConfig& base) {
  auto has = [&](std::string_view part) {
    std::size_t start = 0;
    while (start <= name.size()) {
      const auto end = name.find('+', start);
      const auto token = name.substr(start, end == std::string_view::npos ? end : end - start);
      if (token == part) return true;
      if (end == std::string_view::npos) break;
      start = end + 1;
    }
    return false;
  };
  require(std::find(kAblationViewSets.begin(), kAblationViewSets.end(), name) != kAblationViewSets.end(),
          ErrorCode::InvalidArgument, "unknown augmentation set '" + std::string(name) + "'");
  AugmentConfig cfg = base;
  cfg.num_scale = has("scale") ? base.num_scale : 1;
  cfg.num_offset = has("offset") ? 9 : 1;
  cfg.enable_rotation = has("rotate");
  cfg.enable_flip = has("flip");
  return cfg;
}

struct NamedViews {
  std::string name;
  std::vector<ViewSpec> views;
};

inline std::vector<NamedViews> ablation_view_sets(const DefectInstance& instance, ImageSize image,
                                                  const AugmentConfig& config) {
  std::vector<NamedViews> out;
  for (auto name : kAblationViewSets)
    out.push_back({std::string(name), generate_views(instance, image, ablation_config(name, config))});
  return out;
}

// ---------------------------------------------------------------------------
// Rendering

/// Rotates a square raster counter-clockwise by a multiple of 90 degrees.
template <typename T>
Raster<T> rotate_ccw(const Raster<T>& in, int degrees) {
  require(in.width() == in.height(), ErrorCode::InvalidArgument, "rotation needs a square raster");
  const int turns = ((degrees / 90) % 4 + 4) % 4;
  require(degrees % 90 == 0, ErrorCode::InvalidArgument, "rotation must be a multiple of 90");
  Raster<T> cur = in;
  const int n = in.width();
  for (int t = 0; t < turns; ++t) {
    Raster<T> next(n, n, in.channels());
    for (int y = 0; y < n; ++y)
      for (int x = 0; x < n; ++x)
        for (int c = 0; c < in.channels(); ++c) next.at(y, n - 1 - x, c) = cur.at(x, y, c);
    cur = std::move(next);
  }
  return cur;
}

template <typename T>
Raster<T> flip_horizontal(const Raster<T>& in) {
  Raster<T> out(in.width(), in.height(), in.channels());
  for (int y = 0; y < in.height(); ++y)
    for (int x = 0; x < in.width(); ++x)
      for (int c = 0; c < in.channels(); ++c) out.at(in.width() - 1 - x, y, c) = in.at(x, y, c);
  return out;
}

/// Rotation first, then flip.
template <typename T>
Raster<T> apply_transform(const Raster<T>& in, int rotation, Flip flip) {
  Raster<T> out = rotate_ccw(in, rotation);
  return flip == Flip::Horizontal ? flip_horizontal(out) : out;
}

template <typename T>
Raster<T> invert_transform(const Raster<T>& in, int rotation, Flip flip) {
  const Raster<T> unflipped = flip == Flip::Horizontal ? flip_horizontal(in) : in;
  return rotate_ccw(unflipped, 360 - rotation);
}

/// Bilinear resize of a crop with half-pixel centres; an unscaled crop is copied exactly.
inline Image resize_bilinear(const Image& src, Rect crop, int out_side) {
  Image out(out_side, out_side, src.channels());
  const double sx = static_cast<double>(crop.w) / out_side;
  const double sy = static_cast<double>(crop.h) / out_side;
  auto coord = [](double dst, double scale, int n, int& i0, int& i1, double& t) {
    const double s = std::clamp((dst + 0.5) * scale - 0.5, 0.0, static_cast<double>(n - 1));
    i0 = static_cast<int>(std::floor(s));
    i1 = std::min(i0 + 1, n - 1);
    t = s - i0;
  };
  for (int y = 0; y < out_side; ++y) {
    int y0, y1;
    double ty;
    coord(y, sy, crop.h, y0, y1, ty);
    for (int x = 0; x < out_side; ++x) {
      int x0, x1;
      double tx;
      coord(x, sx, crop.w, x0, x1, tx);
      for (int c = 0; c < src.channels(); ++c) {
        const double a = src.at(crop.x + x0, crop.y + y0, c), b = src.at(crop.x + x1, crop.y + y0, c);
        const double d = src.at(crop.x + x0, crop.y + y1, c), e = src.at(crop.x + x1, crop.y + y1, c);
        const double top = a + (b - a) * tx;
        const double bottom = d + (e - d) * tx;
        const double v = top + (bottom - top) * ty;
        out.at(x, y, c) = static_cast<std::uint8_t>(std::clamp(round_half_up(v), 0, 255));
      }
    }
  }
  return out;
}

inline Mask resize_nearest(const Mask& src, Rect crop, int out_side) {
  Mask out(out_side, out_side);
  for (int y = 0; y < out_side; ++y) {
    const int syi = std::min(crop.h - 1, static_cast<int>(std::floor((y + 0.5) * crop.h / out_side)));
    for (int x = 0; x < out_side; ++x) {
      const int sxi = std::min(crop.w - 1, static_cast<int>(std::floor((x + 0.5) * crop.w / out_side)));
      out.at(x, y) = src.at(crop.x + sxi, crop.y + syi);
    }
  }
  return out;
}

struct RenderedView {
  Image patch;
  std::optional<Mask> alpha;  // 0 / 255; absent for MaskMode::None
};

/// Crops, resizes (bilinear image, nearest mask) and transforms one view.
inline RenderedView render_view(const Image& image, const Mask& mask, const ViewSpec& spec, int out_side) {
  require(out_side > 0, ErrorCode::InvalidArgument, "out_side must be positive");
  require(spec.crop.inside(image.size()) && spec.crop.w > 0 && spec.crop.h > 0, ErrorCode::InvalidArgument,
          "view crop outside image");
  RenderedView out;
  out.patch = apply_transform(resize_bilinear(image, spec.crop, out_side), spec.rotation, spec.flip);
  switch (spec.mask_mode) {
    case MaskMode::Instance: {
      require(mask.size() == image.size(), ErrorCode::ShapeMismatch, "mask size differs from image");
      Mask alpha = resize_nearest(mask, spec.crop, out_side);
      for (auto& v : alpha.pixels()) v = v ? 255 : 0;
      out.alpha = apply_transform(alpha, spec.rotation, spec.flip);
      break;
    }
    case MaskMode::FullForeground:
      out.alpha = Mask(out_side, out_side, 1, 255);
      break;
    case MaskMode::None:
      break;
  }
  return out;
}

}  // namespace mvrec

#pragma once

#include <cstdint>
#include <numeric>
#include <vector>

#include "mvrec/error.hpp"
#include "mvrec/raster.hpp"

namespace mvrec {

enum class Connectivity { Four = 4, Eight = 8 };

struct Component {
  int label = 0;  // 1-based
  long long area = 0;
  Rect bbox;
  int first_x = 0;  // first pixel in raster order
  int first_y = 0;
};

struct ComponentLabeling {
  Raster<std::int32_t> labels;  // 0 = background
  std::vector<Component> components;

  Mask component_mask(int label) const {
    Mask m(labels.width(), labels.height());
    for (int y = 0; y < labels.height(); ++y)
      for (int x = 0; x < labels.width(); ++x)
        if (labels.at(x, y) == label) m.at(x, y) = 1;
    return m;
  }
};

namespace detail {

class DisjointSet {
 public:
  int make() {
    parent_.push_back(static_cast<int>(parent_.size()));
    return parent_.back();
  }
  int find(int a) {
    while (parent_[a] != a) {
      parent_[a] = parent_[parent_[a]];
      a = parent_[a];
    }
    return a;
  }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (b < a) std::swap(a, b);
    parent_[b] = a;  // smaller provisional label wins
  }

 private:
  std::vector<int> parent_;
};

}  // namespace detail

/// Two-pass union-find labelling. Components are numbered 1..n in the raster
/// order of their first pixel.
inline ComponentLabeling connected_components(const Mask& mask,
                                              Connectivity connectivity = Connectivity::Eight) {
  require(mask.channels() == 1, ErrorCode::InvalidArgument, "connected_components expects a 1-channel mask");
  const int w = mask.width(), h = mask.height();
  Raster<std::int32_t> provisional(w, h, 1, -1);
  detail::DisjointSet sets;

  const bool eight = connectivity == Connectivity::Eight;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!mask.at(x, y)) continue;
      int label = -1;
      auto visit = [&](int nx, int ny) {
        if (nx < 0 || ny < 0 || nx >= w) return;
        const int l = provisional.at(nx, ny);
        if (l < 0) return;
        if (label < 0) label = l;
        else sets.unite(label, l);
      };
      visit(x - 1, y);
      visit(x, y - 1);
      if (eight) {
        visit(x - 1, y - 1);
        visit(x + 1, y - 1);
      }
      provisional.at(x, y) = label < 0 ? sets.make() : label;
    }
  }

  ComponentLabeling out{Raster<std::int32_t>(w, h), {}};
  std::vector<int> final_label;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int p = provisional.at(x, y);
      if (p < 0) continue;
      const int root = sets.find(p);
      if (static_cast<int>(final_label.size()) <= root) final_label.resize(root + 1, 0);
      if (final_label[root] == 0) {
        final_label[root] = static_cast<int>(out.components.size()) + 1;
        out.components.push_back({final_label[root], 0, Rect{x, y, 1, 1}, x, y});
      }
      const int label = final_label[root];
      out.labels.at(x, y) = label;
      auto& c = out.components[label - 1];
      ++c.area;
      const int x0 = std::min(c.bbox.x, x), y0 = std::min(c.bbox.y, y);
      const int x1 = std::max(c.bbox.right(), x + 1), y1 = std::max(c.bbox.bottom(), y + 1);
      c.bbox = Rect{x0, y0, x1 - x0, y1 - y0};
    }
  }
  return out;
}

}  // namespace mvrec

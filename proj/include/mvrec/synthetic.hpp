#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include "mvrec/dataset.hpp"
#include "mvrec/embedding_store.hpp"
#include "mvrec/error.hpp"
#include "mvrec/geometry.hpp"
#include "mvrec/rng.hpp"

namespace mvrec {

enum class CenterKind {
  Orthogonal,  // random orthonormal set (requires N <= C)
  Gaussian,    // independent unit-normalised Gaussian directions
};

/// Stand-in for the image encoder. Every view embedding is
///   normalize(center[class] + instance_offset + view_noise)
/// with unit-norm centres. Noise vectors are isotropic Gaussian with
/// per-coordinate std sigma / sqrt(C), so sigma is the expected noise norm
/// relative to the centre norm. The instance offset is seeded by
/// (seed, instance_id) and the view noise by (seed, instance_id, view_id),
/// so view v of an instance is identical whatever the total view count.
struct SyntheticConfig {
  std::uint32_t channels = 32;
  double sigma_inst = 0.05;
  double sigma_view = 0.2;
  std::uint64_t seed = 0;
  CenterKind centers = CenterKind::Orthogonal;
  std::string backbone_tag = "synthetic";
};

namespace detail {

inline std::vector<double> gaussian_vector(Rng& rng, std::size_t n, double scale) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.normal() * scale;
  return v;
}

}  // namespace detail

/// Unit-norm class centres for one dataset, one row per class.
inline Tensor2<double> synthetic_centers(const DatasetManifest& manifest, const SyntheticConfig& cfg) {
  const std::size_t n = manifest.classes.size(), c = cfg.channels;
  require(c >= 1, ErrorCode::InvalidArgument, "channels must be >= 1");
  require(cfg.centers != CenterKind::Orthogonal || n <= c, ErrorCode::InvalidArgument,
          "orthogonal centres need N <= C");
  Rng rng(mix_seed(cfg.seed, fnv1a("centers/" + manifest.dataset_name)));
  Tensor2<double> centers(n, c);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> v;
    double len = 0.0;
    do {
      v = detail::gaussian_vector(rng, c, 1.0);
      if (cfg.centers == CenterKind::Orthogonal) {
        for (std::size_t j = 0; j < i; ++j) {
          const double proj = dot<double>(v, centers.row(j));
          for (std::size_t k = 0; k < c; ++k) v[k] -= proj * centers(j, k);
        }
      }
      len = norm<double>(v);
    } while (len < 1e-6);
    for (std::size_t k = 0; k < c; ++k) centers(i, k) = v[k] / len;
  }
  return centers;
}

/// Embeds every view in `views` whose instance belongs to one of the manifests.
inline EmbeddingFile synthetic_embeddings(const std::vector<DatasetManifest>& manifests,
                                          const std::vector<ViewSpec>& views, const SyntheticConfig& cfg) {
  require(cfg.sigma_inst >= 0.0 && cfg.sigma_view >= 0.0, ErrorCode::InvalidArgument, "sigmas must be >= 0");
  struct Owner {
    const Tensor2<double>* centers;
    std::size_t label;
  };
  std::vector<Tensor2<double>> all_centers;
  all_centers.reserve(manifests.size());
  for (const auto& m : manifests) all_centers.push_back(synthetic_centers(m, cfg));
  std::map<std::string, Owner, std::less<>> owner;
  for (std::size_t d = 0; d < manifests.size(); ++d)
    for (const auto& inst : manifests[d].instances)
      owner[inst.instance_id] = {&all_centers[d], manifests[d].class_index(inst.class_label)};

  const std::size_t c = cfg.channels;
  const double scale = 1.0 / std::sqrt(static_cast<double>(c));
  EmbeddingFile file;
  file.channels = cfg.channels;
  file.backbone_tag = cfg.backbone_tag;
  file.records.reserve(views.size());
  std::string cached_id;
  std::vector<double> base;
  for (const auto& v : views) {
    auto it = owner.find(v.instance_id);
    require(it != owner.end(), ErrorCode::UnknownKey, "view of unknown instance " + v.instance_id);
    if (v.instance_id != cached_id) {
      cached_id = v.instance_id;
      Rng rng(mix_seed(cfg.seed, fnv1a("instance/" + v.instance_id)));
      base = detail::gaussian_vector(rng, c, cfg.sigma_inst * scale);
      auto center = it->second.centers->row(it->second.label);
      for (std::size_t k = 0; k < c; ++k) base[k] += center[k];
    }
    Rng rng(mix_seed(cfg.seed, fnv1a(embedding_key("view/" + v.instance_id, v.view_id))));
    std::vector<double> x = detail::gaussian_vector(rng, c, cfg.sigma_view * scale);
    for (std::size_t k = 0; k < c; ++k) x[k] += base[k];
    const double len = norm<double>(x);
    EmbeddingRecord r;
    r.key = embedding_key(v.instance_id, v.view_id);
    r.values.resize(c);
    for (std::size_t k = 0; k < c; ++k) r.values[k] = static_cast<float>(x[k] / len);
    file.records.push_back(std::move(r));
  }
  return file;
}

/// A manifest of `instances_per_class` toy instances per class on 96x96
/// images, each with a small square mask. Splits follow assign_splits.
inline DatasetManifest make_synthetic_manifest(const std::string& name, std::size_t num_classes,
                                               std::size_t instances_per_class, std::uint64_t seed = 0) {
  require(num_classes >= 2 && instances_per_class >= 2, ErrorCode::InvalidArgument,
          "synthetic manifest needs >= 2 classes and >= 2 instances per class");
  constexpr int kSide = 96, kBox = 8;
  DatasetManifest m;
  m.dataset_name = name;
  Rng rng(mix_seed(seed, fnv1a("layout/" + name)));
  for (std::size_t c = 0; c < num_classes; ++c) {
    const std::string cls = "class" + std::to_string(c);
    m.classes.push_back(cls);
    for (std::size_t i = 0; i < instances_per_class; ++i) {
      const int x = static_cast<int>(rng.below(kSide - kBox)), y = static_cast<int>(rng.below(kSide - kBox));
      Mask mask(kSide, kSide);
      for (int yy = y; yy < y + kBox; ++yy)
        for (int xx = x; xx < x + kBox; ++xx) mask.at(xx, yy) = 1;
      DefectInstance inst;
      char buf[24];
      std::snprintf(buf, sizeof buf, "%04zu", i);
      inst.instance_id = name + "/" + cls + "/" + buf;
      inst.image_path = inst.instance_id + ".png";
      inst.class_label = cls;
      inst.mask = rle_encode(mask);
      inst.bbox = Rect{x, y, kBox, kBox};
      inst.area = kBox * kBox;
      m.instances.push_back(std::move(inst));
    }
  }
  finalize_manifest(m, 2);
  assign_splits(m, seed);
  return m;
}

/// Views for every instance of the manifests under one augmentation config.
inline std::vector<ViewSpec> generate_all_views(const std::vector<DatasetManifest>& manifests,
                                                const AugmentConfig& config) {
  std::vector<ViewSpec> views;
  for (const auto& m : manifests)
    for (const auto& inst : m.instances) {
      auto v = generate_views(inst, config);
      views.insert(views.end(), v.begin(), v.end());
    }
  return views;
}

}  // namespace mvrec

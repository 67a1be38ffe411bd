#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "mvrec/components.hpp"
#include "mvrec/error.hpp"
#include "mvrec/image_io.hpp"
#include "mvrec/parallel.hpp"
#include "mvrec/rle.hpp"
#include "mvrec/rng.hpp"

namespace mvrec {

enum class Split { Train, Test };

inline std::string_view to_string(Split s) { return s == Split::Train ? "train" : "test"; }

struct DefectInstance {
  std::string instance_id;
  std::string image_path;  // relative to the dataset root
  std::string class_label;
  RleMask mask;
  Rect bbox;
  long long area = 0;
  Split split = Split::Train;

  ImageSize image_size() const { return {mask.width, mask.height}; }

  friend bool operator==(const DefectInstance&, const DefectInstance&) = default;
};

struct SplitCounts {
  std::size_t train = 0;
  std::size_t test = 0;
  friend bool operator==(const SplitCounts&, const SplitCounts&) = default;
};

/// One N-way problem (an MVTec-FS product category, or a whole bbox dataset).
/// Instances are ordered by class (in `classes` order), then instance id.
struct DatasetManifest {
  std::string dataset_name;
  std::vector<std::string> classes;
  std::vector<DefectInstance> instances;

  std::size_t class_index(const std::string& label) const {
    auto it = std::find(classes.begin(), classes.end(), label);
    require(it != classes.end(), ErrorCode::UnknownClass, "class '" + label + "' not in " + dataset_name);
    return static_cast<std::size_t>(it - classes.begin());
  }

  std::map<std::string, SplitCounts> counts() const {
    std::map<std::string, SplitCounts> out;
    for (const auto& c : classes) out[c];
    for (const auto& inst : instances) {
      auto& c = out[inst.class_label];
      (inst.split == Split::Train ? c.train : c.test) += 1;
    }
    return out;
  }

  const DefectInstance* find(const std::string& id) const {
    for (const auto& inst : instances)
      if (inst.instance_id == id) return &inst;
    return nullptr;
  }

  friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;
};

/// Number of instances of a defect type that go to the train split: ceil(n / 2).
constexpr std::size_t train_count(std::size_t n) { return (n + 1) / 2; }

/// Assigns a 50/50 split independently per class. Each class's instances
/// (in id order) are shuffled with a generator seeded from (seed, dataset,
/// class); the first train_count(n) become train.
inline void assign_splits(DatasetManifest& manifest, std::uint64_t seed) {
  for (const auto& cls : manifest.classes) {
    std::vector<DefectInstance*> members;
    for (auto& inst : manifest.instances)
      if (inst.class_label == cls) members.push_back(&inst);
    std::sort(members.begin(), members.end(),
              [](const auto* a, const auto* b) { return a->instance_id < b->instance_id; });
    Rng rng(mix_seed(seed, fnv1a(manifest.dataset_name + "/" + cls)));
    rng.shuffle(members);
    const std::size_t n_train = train_count(members.size());
    for (std::size_t i = 0; i < members.size(); ++i) members[i]->split = i < n_train ? Split::Train : Split::Test;
  }
}

/// Canonical ordering plus class-set filtering shared by every layout.
inline void finalize_manifest(DatasetManifest& m, std::size_t min_class_instances) {
  std::map<std::string, std::size_t> per_class;
  for (const auto& inst : m.instances) ++per_class[inst.class_label];
  m.classes.clear();
  for (const auto& [cls, n] : per_class)
    if (n >= min_class_instances) m.classes.push_back(cls);
  std::erase_if(m.instances, [&](const DefectInstance& inst) {
    return std::find(m.classes.begin(), m.classes.end(), inst.class_label) == m.classes.end();
  });
  std::sort(m.instances.begin(), m.instances.end(), [&](const auto& a, const auto& b) {
    if (a.class_label != b.class_label) return m.class_index(a.class_label) < m.class_index(b.class_label);
    return a.instance_id < b.instance_id;
  });
  std::set<std::string> ids;
  for (const auto& inst : m.instances)
    require(ids.insert(inst.instance_id).second, ErrorCode::InvalidArgument,
            "duplicate instance id " + inst.instance_id);
}

enum class DatasetLayout {
  /// <root>/<category>/test/<type>/<stem>.png with masks at
  /// <root>/<category>/ground_truth/<type>/<stem>_mask.png
  MvtecMask,
  /// <root>/annotations.csv with header image,width,height,class,x,y,w,h;
  /// every row is one instance, all rows form one dataset.
  BboxCsv,
};

struct BuildOptions {
  DatasetLayout layout = DatasetLayout::MvtecMask;
  std::filesystem::path root;
  /// Restrict an MVTec build to these categories (empty = all).
  std::vector<std::string> categories;
  /// Name for a BboxCsv dataset (defaults to the root directory name).
  std::string dataset_name;
  /// Defect-type folders that carry no single class label.
  std::vector<std::string> exclude_types = {"good", "combined"};
  /// Optional relabelling of type folders / CSV classes. When non-empty,
  /// every encountered type must be present, otherwise UnknownClass.
  std::map<std::string, std::string> class_map;
  long long min_area = 1;
  /// Classes with fewer than 2*k_max instances are dropped, then datasets
  /// with fewer than two classes are dropped.
  std::size_t k_max = 1;
  Connectivity connectivity = Connectivity::Eight;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
};

namespace detail {

inline std::string map_class(const BuildOptions& opt, const std::string& raw) {
  if (opt.class_map.empty()) return raw;
  auto it = opt.class_map.find(raw);
  require(it != opt.class_map.end(), ErrorCode::UnknownClass, "no class mapping for '" + raw + "'");
  return it->second;
}

inline std::vector<std::filesystem::path> sorted_entries(const std::filesystem::path& dir, bool directories) {
  std::vector<std::filesystem::path> out;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (directories ? e.is_directory() : e.is_regular_file()) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

inline DatasetManifest build_mvtec_category(const BuildOptions& opt, const std::string& category) {
  namespace fs = std::filesystem;
  const fs::path test_dir = opt.root / category / "test";
  const fs::path gt_dir = opt.root / category / "ground_truth";
  require(fs::is_directory(test_dir), ErrorCode::MissingMask, "no test folder for category " + category);

  struct Job {
    std::string type;
    std::string label;
    fs::path image;
    fs::path mask;
  };
  std::vector<Job> jobs;
  for (const auto& type_dir : sorted_entries(test_dir, true)) {
    const std::string type = type_dir.filename().string();
    if (std::find(opt.exclude_types.begin(), opt.exclude_types.end(), type) != opt.exclude_types.end()) continue;
    const std::string label = map_class(opt, type);
    for (const auto& img : sorted_entries(type_dir, false)) {
      if (img.extension() != ".png") continue;
      const fs::path mask = gt_dir / type / (img.stem().string() + "_mask.png");
      require(fs::is_regular_file(mask), ErrorCode::MissingMask, mask.string());
      jobs.push_back({type, label, img, mask});
    }
  }

  std::vector<std::vector<DefectInstance>> per_image(jobs.size());
  parallel_for(jobs.size(), opt.threads, [&](std::size_t j) {
    const auto& job = jobs[j];
    const Mask mask = to_mask(read_png(job.mask));
    const auto labeling = connected_components(mask, opt.connectivity);
    for (const auto& comp : labeling.components) {
      if (comp.area < opt.min_area) continue;
      DefectInstance inst;
      inst.instance_id = category + "/" + job.type + "/" + job.image.stem().string() + "-" +
                         std::to_string(comp.label);
      inst.image_path = fs::relative(job.image, opt.root).generic_string();
      inst.class_label = job.label;
      inst.mask = rle_encode(labeling.component_mask(comp.label));
      inst.bbox = comp.bbox;
      inst.area = comp.area;
      per_image[j].push_back(std::move(inst));
    }
  });

  DatasetManifest m;
  m.dataset_name = category;
  for (auto& v : per_image)
    for (auto& inst : v) m.instances.push_back(std::move(inst));
  finalize_manifest(m, 2 * opt.k_max);
  assign_splits(m, opt.seed);
  return m;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

inline DatasetManifest build_bbox_csv(const BuildOptions& opt) {
  namespace fs = std::filesystem;
  const fs::path csv = opt.root / "annotations.csv";
  std::ifstream in(csv);
  require(in.good(), ErrorCode::MissingMask, csv.string());
  std::string line;
  std::getline(in, line);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  require(line == "image,width,height,class,x,y,w,h", ErrorCode::CorruptFile,
          "annotations.csv header must be image,width,height,class,x,y,w,h");

  DatasetManifest m;
  m.dataset_name = opt.dataset_name.empty() ? opt.root.filename().string() : opt.dataset_name;
  std::map<std::string, int> per_image_index;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    require(cells.size() == 8, ErrorCode::CorruptFile, csv.string() + ":" + std::to_string(line_no));
    int v[6];
    for (int k = 0; k < 6; ++k) {
      const auto& s = cells[k < 2 ? k + 1 : k + 2];
      auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v[k]);
      require(ec == std::errc{} && p == s.data() + s.size(), ErrorCode::CorruptFile,
              csv.string() + ":" + std::to_string(line_no) + " bad integer '" + s + "'");
    }
    const int width = v[0], height = v[1];
    Rect box{v[2], v[3], v[4], v[5]};
    require(width > 0 && height > 0 && box.w > 0 && box.h > 0 && box.inside({width, height}),
            ErrorCode::InvalidArgument, csv.string() + ":" + std::to_string(line_no) + " box outside image");
    Mask mask(width, height);
    for (int y = box.y; y < box.bottom(); ++y)
      for (int x = box.x; x < box.right(); ++x) mask.at(x, y) = 1;
    if (box.area() < opt.min_area) continue;
    const std::string label = map_class(opt, cells[3]);
    const std::string stem = fs::path(cells[0]).stem().string();
    const int k = ++per_image_index[cells[0]];
    DefectInstance inst;
    inst.instance_id = m.dataset_name + "/" + label + "/" + stem + "-" + std::to_string(k);
    inst.image_path = cells[0];
    inst.class_label = label;
    inst.mask = rle_encode(mask);
    inst.bbox = box;
    inst.area = box.area();
    m.instances.push_back(std::move(inst));
  }
  finalize_manifest(m, 2 * opt.k_max);
  assign_splits(m, opt.seed);
  return m;
}

}  // namespace detail

/// Builds one manifest per dataset found under `opt.root`.
inline std::vector<DatasetManifest> build_manifests(const BuildOptions& opt) {
  namespace fs = std::filesystem;
  require(fs::is_directory(opt.root), ErrorCode::IoError, "dataset root not found: " + opt.root.string());
  std::vector<DatasetManifest> out;
  if (opt.layout == DatasetLayout::BboxCsv) {
    out.push_back(detail::build_bbox_csv(opt));
  } else {
    std::vector<std::string> categories = opt.categories;
    if (categories.empty()) {
      for (const auto& d : detail::sorted_entries(opt.root, true))
        if (fs::is_directory(d / "test")) categories.push_back(d.filename().string());
    }
    for (const auto& cat : categories) out.push_back(detail::build_mvtec_category(opt, cat));
  }
  std::erase_if(out, [](const DatasetManifest& m) { return m.classes.size() < 2; });
  return out;
}

/// One N-way K-shot task: K train instances per class, queries = the whole test split.
struct Episode {
  struct Item {
    std::string instance_id;
    std::size_t label = 0;  // index into classes
    friend bool operator==(const Item&, const Item&) = default;
  };
  std::string dataset_name;
  std::vector<std::string> classes;
  std::vector<Item> support;  // grouped by class, class order
  std::vector<Item> query;
  std::size_t k = 0;
  std::uint64_t seed = 0;

  std::size_t n() const { return classes.size(); }
  friend bool operator==(const Episode&, const Episode&) = default;
};

inline const std::vector<std::uint64_t> kDefaultSeeds = {0, 1, 2, 3, 4};

/// Samples K support instances per class from the train split.
///
/// For each class c (manifest order) the train members are taken in manifest
/// order and a generator Rng(mix_seed(seed, fnv1a(dataset + "/" + c))) runs
/// a partial Fisher-Yates: for i < K swap(cand[i], cand[i + below(n - i)]).
inline Episode sample_support(const DatasetManifest& manifest, std::size_t k, std::uint64_t seed) {
  require(k >= 1, ErrorCode::InvalidArgument, "K must be >= 1");
  Episode ep;
  ep.dataset_name = manifest.dataset_name;
  ep.classes = manifest.classes;
  ep.k = k;
  ep.seed = seed;
  for (std::size_t c = 0; c < manifest.classes.size(); ++c) {
    const auto& cls = manifest.classes[c];
    std::vector<const DefectInstance*> cand;
    for (const auto& inst : manifest.instances)
      if (inst.class_label == cls && inst.split == Split::Train) cand.push_back(&inst);
    require(cand.size() >= k, ErrorCode::InsufficientShots,
            "class=" + cls + " available=" + std::to_string(cand.size()) + " requested=" + std::to_string(k));
    Rng rng(mix_seed(seed, fnv1a(manifest.dataset_name + "/" + cls)));
    for (std::size_t i = 0; i < k; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng.below(cand.size() - i));
      std::swap(cand[i], cand[j]);
      ep.support.push_back({cand[i]->instance_id, c});
    }
  }
  for (const auto& inst : manifest.instances)
    if (inst.split == Split::Test) ep.query.push_back({inst.instance_id, manifest.class_index(inst.class_label)});
  return ep;
}

}  // namespace mvrec

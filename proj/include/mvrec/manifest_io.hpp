#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mvrec/dataset.hpp"
#include "mvrec/error.hpp"

namespace mvrec {

// Manifest file schema (JSON, two-space indent, keys in the order below):
//
// {
//   "format": "mvrec-manifest", "version": 1,
//   "datasets": [
//     { "dataset": "bottle",
//       "classes": ["broken_large", ...],
//       "counts": {"broken_large": {"train": 10, "test": 10}, ...},
//       "instances": [
//         { "id": "bottle/broken_large/000-1", "image": "bottle/test/broken_large/000.png",
//           "class": "broken_large", "split": "train", "width": 900, "height": 900,
//           "bbox": [x, y, w, h], "area": 1234, "rle": "0 17 3 ..." }, ... ] } ] }
//
// "counts" is derived and ignored when reading.

namespace detail {

inline nlohmann::ordered_json manifest_to_json(const DatasetManifest& m) {
  using nlohmann::ordered_json;
  ordered_json j;
  j["dataset"] = m.dataset_name;
  j["classes"] = m.classes;
  ordered_json counts = ordered_json::object();
  const auto c = m.counts();
  for (const auto& cls : m.classes) counts[cls] = {{"train", c.at(cls).train}, {"test", c.at(cls).test}};
  j["counts"] = counts;
  ordered_json instances = ordered_json::array();
  for (const auto& inst : m.instances) {
    ordered_json i;
    i["id"] = inst.instance_id;
    i["image"] = inst.image_path;
    i["class"] = inst.class_label;
    i["split"] = std::string(to_string(inst.split));
    i["width"] = inst.mask.width;
    i["height"] = inst.mask.height;
    i["bbox"] = {inst.bbox.x, inst.bbox.y, inst.bbox.w, inst.bbox.h};
    i["area"] = inst.area;
    i["rle"] = rle_to_string(inst.mask);
    instances.push_back(std::move(i));
  }
  j["instances"] = std::move(instances);
  return j;
}

inline DatasetManifest manifest_from_json(const nlohmann::ordered_json& j) {
  DatasetManifest m;
  m.dataset_name = j.at("dataset").get<std::string>();
  m.classes = j.at("classes").get<std::vector<std::string>>();
  for (const auto& i : j.at("instances")) {
    DefectInstance inst;
    inst.instance_id = i.at("id").get<std::string>();
    inst.image_path = i.at("image").get<std::string>();
    inst.class_label = i.at("class").get<std::string>();
    const auto split = i.at("split").get<std::string>();
    require(split == "train" || split == "test", ErrorCode::CorruptFile, "bad split '" + split + "'");
    inst.split = split == "train" ? Split::Train : Split::Test;
    const int w = i.at("width").get<int>(), h = i.at("height").get<int>();
    inst.mask = rle_from_string(i.at("rle").get<std::string>(), w, h);
    const auto b = i.at("bbox").get<std::vector<int>>();
    require(b.size() == 4, ErrorCode::CorruptFile, "bbox must have 4 entries");
    inst.bbox = Rect{b[0], b[1], b[2], b[3]};
    inst.area = i.at("area").get<long long>();
    m.class_index(inst.class_label);  // UnknownClass if not declared
    m.instances.push_back(std::move(inst));
  }
  return m;
}

}  // namespace detail

inline std::string manifests_to_string(const std::vector<DatasetManifest>& manifests) {
  nlohmann::ordered_json j;
  j["format"] = "mvrec-manifest";
  j["version"] = 1;
  j["datasets"] = nlohmann::ordered_json::array();
  for (const auto& m : manifests) j["datasets"].push_back(detail::manifest_to_json(m));
  return j.dump(2) + "\n";
}

inline std::vector<DatasetManifest> manifests_from_string(const std::string& text) {
  nlohmann::ordered_json j;
  try {
    j = nlohmann::ordered_json::parse(text);
    require(j.at("format") == "mvrec-manifest", ErrorCode::CorruptFile, "not an mvrec manifest");
    require(j.at("version") == 1, ErrorCode::CorruptFile, "unsupported manifest version");
    std::vector<DatasetManifest> out;
    for (const auto& d : j.at("datasets")) out.push_back(detail::manifest_from_json(d));
    return out;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::CorruptFile, std::string("manifest: ") + e.what());
  }
}

inline void write_manifests(const std::filesystem::path& path, const std::vector<DatasetManifest>& manifests) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrorCode::IoError, "cannot write " + path.string());
  out << manifests_to_string(manifests);
  require(out.good(), ErrorCode::IoError, "write failed: " + path.string());
}

inline std::vector<DatasetManifest> read_manifests(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorCode::IoError, "cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return manifests_from_string(ss.str());
}

}  // namespace mvrec

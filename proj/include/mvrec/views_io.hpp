#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mvrec/error.hpp"
#include "mvrec/geometry.hpp"

namespace mvrec {

// Views file: JSON Lines, one compact object per view, fields in this order:
// {"instance_id":"...","view_id":0,"x":..,"y":..,"w":..,"h":..,"scale_index":0,
//  "offset_index":4,"rotation":0,"flip":"none","mask_mode":"instance"}
// Records of one instance are contiguous and ordered by view_id.

inline std::string view_to_line(const ViewSpec& v) {
  nlohmann::ordered_json j;
  j["instance_id"] = v.instance_id;
  j["view_id"] = v.view_id;
  j["x"] = v.crop.x;
  j["y"] = v.crop.y;
  j["w"] = v.crop.w;
  j["h"] = v.crop.h;
  j["scale_index"] = v.scale_index;
  j["offset_index"] = v.offset_index;
  j["rotation"] = v.rotation;
  j["flip"] = std::string(to_string(v.flip));
  j["mask_mode"] = std::string(to_string(v.mask_mode));
  return j.dump();
}

inline ViewSpec view_from_line(const std::string& line) {
  try {
    const auto j = nlohmann::json::parse(line);
    ViewSpec v;
    v.instance_id = j.at("instance_id").get<std::string>();
    v.view_id = j.at("view_id").get<int>();
    v.crop = Rect{j.at("x").get<int>(), j.at("y").get<int>(), j.at("w").get<int>(), j.at("h").get<int>()};
    v.scale_index = j.at("scale_index").get<int>();
    v.offset_index = j.at("offset_index").get<int>();
    v.rotation = j.at("rotation").get<int>();
    v.flip = parse_flip(j.at("flip").get<std::string>());
    v.mask_mode = parse_mask_mode(j.at("mask_mode").get<std::string>());
    return v;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::CorruptFile, std::string("views record: ") + e.what());
  }
}

inline void write_views(const std::filesystem::path& path, const std::vector<ViewSpec>& views) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrorCode::IoError, "cannot write " + path.string());
  for (const auto& v : views) out << view_to_line(v) << '\n';
  require(out.good(), ErrorCode::IoError, "write failed: " + path.string());
}

inline std::vector<ViewSpec> read_views(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorCode::IoError, "cannot read " + path.string());
  std::vector<ViewSpec> views;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    views.push_back(view_from_line(line));
  }
  return views;
}

/// View ids per instance, preserving first-appearance order of instances.
struct ViewIndex {
  std::vector<std::string> instances;
  std::map<std::string, std::vector<int>> view_ids;

  explicit ViewIndex(const std::vector<ViewSpec>& views) {
    for (const auto& v : views) {
      auto [it, inserted] = view_ids.try_emplace(v.instance_id);
      if (inserted) instances.push_back(v.instance_id);
      it->second.push_back(v.view_id);
    }
  }
};

}  // namespace mvrec

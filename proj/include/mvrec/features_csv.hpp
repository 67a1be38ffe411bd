#pragma once

#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "mvrec/embedding_store.hpp"
#include "mvrec/error.hpp"

namespace mvrec {

/// Shortest decimal text that parses back to exactly `v`.
inline std::string format_double(double v) {
  char buf[32];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

struct FeatureRow {
  std::string instance_id;
  std::string class_label;
  std::vector<double> feature;
};

/// Writes one header-less row per instance: instance_id,class,f_0,...,f_{C-1}.
/// Rows follow instance-id order. Returns the number of rows written.
inline std::size_t export_features_csv(const EmbeddingMap& embeddings,
                                       const std::map<std::string, std::string>& labels,
                                       const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrorCode::IoError, "cannot write " + path.string());
  for (const auto& [id, e] : embeddings) {
    auto it = labels.find(id);
    require(it != labels.end(), ErrorCode::UnknownClass, "no class label for " + id);
    out << id << ',' << it->second;
    for (double v : e.feature) out << ',' << format_double(v);
    out << '\n';
  }
  require(out.good(), ErrorCode::IoError, "write failed: " + path.string());
  return embeddings.size();
}

inline std::vector<FeatureRow> read_features_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorCode::IoError, "cannot read " + path.string());
  std::vector<FeatureRow> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    FeatureRow row;
    std::size_t start = 0, col = 0;
    while (start <= line.size()) {
      auto end = line.find(',', start);
      if (end == std::string::npos) end = line.size();
      const std::string cell = line.substr(start, end - start);
      if (col == 0) row.instance_id = cell;
      else if (col == 1) row.class_label = cell;
      else {
        double v = 0;
        auto [p, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
        require(ec == std::errc{}, ErrorCode::CorruptFile, "bad number '" + cell + "'");
        row.feature.push_back(v);
      }
      ++col;
      start = end + 1;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace mvrec

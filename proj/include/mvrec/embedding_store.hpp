#pragma once

#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "mvrec/error.hpp"
#include "mvrec/geometry.hpp"
#include "mvrec/tensor.hpp"
#include "mvrec/views_io.hpp"

namespace mvrec {

// MVE1 embedding interchange format. All integers are unsigned 32-bit
// little-endian, floats are IEEE-754 binary32 little-endian.
//
//   offset 0  magic "MVE1" (4 bytes)
//             version u32 (1 or 2)
//             C u32 (channels)
//             record count u32
//   version 2 only:
//             tag length u32, backbone tag (UTF-8)
//   records:  key length u32, key bytes (UTF-8 "instance_id/view_id"),
//             C x f32
//
// Version 1 is written when the backbone tag is empty, version 2 otherwise.

inline constexpr char kMveMagic[4] = {'M', 'V', 'E', '1'};

struct EmbeddingRecord {
  std::string key;
  std::vector<float> values;
  friend bool operator==(const EmbeddingRecord&, const EmbeddingRecord&) = default;
};

struct EmbeddingFile {
  std::uint32_t channels = 0;
  std::string backbone_tag;
  std::vector<EmbeddingRecord> records;
  friend bool operator==(const EmbeddingFile&, const EmbeddingFile&) = default;
};

inline std::string embedding_key(std::string_view instance_id, int view_id) {
  return std::string(instance_id) + "/" + std::to_string(view_id);
}

/// Splits "instance_id/view_id" at the last '/'.
inline std::pair<std::string, int> split_embedding_key(std::string_view key) {
  const auto slash = key.rfind('/');
  require(slash != std::string_view::npos && slash + 1 < key.size(), ErrorCode::CorruptFile,
          "embedding key without view id: " + std::string(key));
  int view = 0;
  const auto tail = key.substr(slash + 1);
  auto [p, ec] = std::from_chars(tail.data(), tail.data() + tail.size(), view);
  require(ec == std::errc{} && p == tail.data() + tail.size(), ErrorCode::CorruptFile,
          "bad view id in key " + std::string(key));
  return {std::string(key.substr(0, slash)), view};
}

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

class ByteReader {
 public:
  explicit ByteReader(std::string_view bytes) : bytes_(bytes) {}

  std::size_t offset() const { return pos_; }
  bool at_end() const { return pos_ == bytes_.size(); }

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  std::string_view take(std::size_t n) {
    need(n);
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

 private:
  void need(std::size_t n) const {
    require(bytes_.size() - pos_ >= n, ErrorCode::CorruptFile,
            "truncated at offset " + std::to_string(pos_));
  }

  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::string serialize_mve(const EmbeddingFile& file) {
  std::string out(kMveMagic, 4);
  detail::put_u32(out, file.backbone_tag.empty() ? 1u : 2u);
  detail::put_u32(out, file.channels);
  detail::put_u32(out, static_cast<std::uint32_t>(file.records.size()));
  if (!file.backbone_tag.empty()) {
    detail::put_u32(out, static_cast<std::uint32_t>(file.backbone_tag.size()));
    out += file.backbone_tag;
  }
  for (const auto& r : file.records) {
    require(r.values.size() == file.channels, ErrorCode::ChannelMismatch,
            "record " + r.key + " has " + std::to_string(r.values.size()) + " channels, file has " +
                std::to_string(file.channels));
    detail::put_u32(out, static_cast<std::uint32_t>(r.key.size()));
    out += r.key;
    for (float v : r.values) detail::put_u32(out, std::bit_cast<std::uint32_t>(v));
  }
  return out;
}

inline EmbeddingFile parse_mve(std::string_view bytes) {
  detail::ByteReader in(bytes);
  const auto magic = in.take(4);
  require(std::memcmp(magic.data(), kMveMagic, 4) == 0, ErrorCode::CorruptFile, "bad magic at offset 0");
  const std::size_t version_offset = in.offset();
  const std::uint32_t version = in.u32();
  require(version == 1 || version == 2, ErrorCode::CorruptFile,
          "unsupported version " + std::to_string(version) + " at offset " + std::to_string(version_offset));
  EmbeddingFile file;
  file.channels = in.u32();
  require(file.channels > 0, ErrorCode::CorruptFile, "zero channels at offset 8");
  const std::uint32_t count = in.u32();
  if (version == 2) {
    const std::uint32_t len = in.u32();
    file.backbone_tag = std::string(in.take(len));
  }
  std::set<std::string, std::less<>> seen;
  file.records.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::size_t record_offset = in.offset();
    EmbeddingRecord r;
    const std::uint32_t len = in.u32();
    r.key = std::string(in.take(len));
    require(seen.insert(r.key).second, ErrorCode::CorruptFile,
            "duplicate key '" + r.key + "' at offset " + std::to_string(record_offset));
    r.values.resize(file.channels);
    for (auto& v : r.values) {
      const std::size_t value_offset = in.offset();
      v = in.f32();
      require(std::isfinite(v), ErrorCode::CorruptFile,
              "non-finite value at offset " + std::to_string(value_offset));
    }
    file.records.push_back(std::move(r));
  }
  require(in.at_end(), ErrorCode::CorruptFile, "trailing bytes at offset " + std::to_string(in.offset()));
  return file;
}

inline void write_mve(const std::filesystem::path& path, const EmbeddingFile& file) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrorCode::IoError, "cannot write " + path.string());
  const std::string bytes = serialize_mve(file);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  require(out.good(), ErrorCode::IoError, "write failed: " + path.string());
}

inline std::string read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorCode::IoError, "cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline EmbeddingFile read_mve(const std::filesystem::path& path) { return parse_mve(read_file_bytes(path)); }

// ---------------------------------------------------------------------------

/// Per-view embeddings of one defect instance and their mean (the MVREC feature).
struct MvrecEmbedding {
  std::string instance_id;
  Tensor2<double> views;  // V x C, rows in view-id order
  std::vector<double> feature;
  std::string backbone_tag;

  std::size_t channels() const { return views.cols(); }
  std::size_t num_views() const { return views.rows(); }
};

using EmbeddingMap = std::map<std::string, MvrecEmbedding>;

/// Builds the averaged feature. With `normalize_before_average` each view is
/// L2-normalised first; by default the mean is taken in raw space.
inline MvrecEmbedding make_embedding(std::string instance_id, Tensor2<double> views,
                                     bool normalize_before_average = false, std::string backbone_tag = {}) {
  require(views.rows() >= 1, ErrorCode::MissingViews, instance_id + " has no views");
  require(views.all_finite(), ErrorCode::CorruptFile, instance_id + " has non-finite values");
  MvrecEmbedding e;
  e.instance_id = std::move(instance_id);
  e.backbone_tag = std::move(backbone_tag);
  if (normalize_before_average) {
    Tensor2<double> unit(views.rows(), views.cols());
    for (std::size_t r = 0; r < views.rows(); ++r) {
      const auto n = normalized<double>(views.row(r));
      std::copy(n.begin(), n.end(), unit.row(r).begin());
    }
    e.feature = column_mean(unit);
  } else {
    e.feature = column_mean(views);
  }
  e.views = std::move(views);
  return e;
}

struct MissingViewsReport {
  std::string instance_id;
  std::size_t expected = 0;
  std::size_t found = 0;
};

struct LoadOptions {
  /// Throw on incomplete coverage or keys absent from the views file
  /// instead of reporting them.
  bool strict = true;
  bool normalize_before_average = false;
  /// Required channel count; 0 accepts whatever the file declares.
  std::uint32_t expected_channels = 0;
};

struct LoadResult {
  EmbeddingMap embeddings;
  std::vector<MissingViewsReport> missing;
  std::vector<std::string> unexpected_keys;
  std::string backbone_tag;
  std::uint32_t channels = 0;
};

/// Joins an embedding file against the views file it was produced from and
/// averages the views of every fully covered instance.
inline LoadResult load_embeddings(const EmbeddingFile& file, const std::vector<ViewSpec>& views,
                                  const LoadOptions& options = {}) {
  if (options.expected_channels != 0) {
    require(file.channels == options.expected_channels, ErrorCode::ChannelMismatch,
            "file has C=" + std::to_string(file.channels) + ", expected " +
                std::to_string(options.expected_channels));
  }
  LoadResult result;
  result.backbone_tag = file.backbone_tag;
  result.channels = file.channels;

  std::map<std::string, const EmbeddingRecord*, std::less<>> by_key;
  for (const auto& r : file.records) by_key.emplace(r.key, &r);

  const ViewIndex index(views);
  std::set<std::string, std::less<>> expected_keys;
  for (const auto& id : index.instances) {
    const auto& ids = index.view_ids.at(id);
    Tensor2<double> rows(ids.size(), file.channels);
    std::size_t found = 0;
    for (std::size_t v = 0; v < ids.size(); ++v) {
      const std::string key = embedding_key(id, ids[v]);
      expected_keys.insert(key);
      auto it = by_key.find(key);
      if (it == by_key.end()) continue;
      ++found;
      std::copy(it->second->values.begin(), it->second->values.end(), rows.row(v).begin());
    }
    if (found != ids.size()) {
      require(!options.strict, ErrorCode::MissingViews,
              "instance=" + id + " expected=" + std::to_string(ids.size()) + " found=" + std::to_string(found));
      result.missing.push_back({id, ids.size(), found});
      continue;
    }
    result.embeddings.emplace(id, make_embedding(id, std::move(rows), options.normalize_before_average,
                                                 file.backbone_tag));
  }
  for (const auto& r : file.records) {
    if (!expected_keys.contains(r.key)) {
      require(!options.strict, ErrorCode::UnknownKey, "key '" + r.key + "' is not in the views file");
      result.unexpected_keys.push_back(r.key);
    }
  }
  return result;
}

inline LoadResult load_embeddings(const std::filesystem::path& path, const std::vector<ViewSpec>& views,
                                  const LoadOptions& options = {}) {
  return load_embeddings(read_mve(path), views, options);
}

}  // namespace mvrec

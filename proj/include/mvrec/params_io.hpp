#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include "mvrec/classifiers/zip_adapter.hpp"
#include "mvrec/classifiers/zip_trainer.hpp"
#include "mvrec/embedding_store.hpp"
#include "mvrec/error.hpp"

namespace mvrec {

// Trained Zip-Adapter-F parameters, same conventions as MVE1 (little-endian,
// u32 lengths) with 64-bit floats so a reload is lossless:
//
//   magic "MVZ1", version u32 = 1
//   C u32, NK u32, N u32, flags u32 (bit0 train_cache, bit1 train_zip, bit2 adapt_cache)
//   config: beta f64, alpha f64, lambda f64, lr f64, iterations u32, seed (u32 lo, u32 hi)
//   N class names (u32 length + UTF-8), NK labels u32
//   W (C x C), b (C), cache (NK x C), all f64 row-major

inline constexpr char kZipParamsMagic[4] = {'M', 'V', 'Z', '1'};

struct SavedZipModel {
  ZipParams params;
  TrainConfig config;
  std::vector<std::string> classes;
  std::vector<std::size_t> labels;
};

namespace detail {

inline void put_f64(std::string& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  put_u32(out, static_cast<std::uint32_t>(bits & 0xFFFFFFFFu));
  put_u32(out, static_cast<std::uint32_t>(bits >> 32));
}

inline std::uint64_t get_u64(ByteReader& in) {
  const std::uint64_t lo = in.u32();
  const std::uint64_t hi = in.u32();
  return lo | (hi << 32);
}

inline double get_f64(ByteReader& in) { return std::bit_cast<double>(get_u64(in)); }

}  // namespace detail

inline std::string serialize_zip_model(const SavedZipModel& m) {
  const auto& p = m.params;
  const std::size_t c = p.channels(), nk = p.cache_features.rows();
  require(p.w.rows() == c && p.w.cols() == c && p.cache_features.cols() == c && m.labels.size() == nk,
          ErrorCode::ShapeMismatch, "zip model shapes are inconsistent");
  std::string out(kZipParamsMagic, 4);
  detail::put_u32(out, 1);
  detail::put_u32(out, static_cast<std::uint32_t>(c));
  detail::put_u32(out, static_cast<std::uint32_t>(nk));
  detail::put_u32(out, static_cast<std::uint32_t>(m.classes.size()));
  detail::put_u32(out, (p.train_cache ? 1u : 0u) | (p.train_zip ? 2u : 0u) | (p.adapt_cache ? 4u : 0u));
  detail::put_f64(out, m.config.beta);
  detail::put_f64(out, m.config.alpha);
  detail::put_f64(out, m.config.lambda);
  detail::put_f64(out, m.config.lr);
  detail::put_u32(out, static_cast<std::uint32_t>(m.config.iterations));
  detail::put_u32(out, static_cast<std::uint32_t>(m.config.seed & 0xFFFFFFFFu));
  detail::put_u32(out, static_cast<std::uint32_t>(m.config.seed >> 32));
  for (const auto& name : m.classes) {
    detail::put_u32(out, static_cast<std::uint32_t>(name.size()));
    out += name;
  }
  for (auto l : m.labels) detail::put_u32(out, static_cast<std::uint32_t>(l));
  for (double v : p.w.flat()) detail::put_f64(out, v);
  for (double v : p.b) detail::put_f64(out, v);
  for (double v : p.cache_features.flat()) detail::put_f64(out, v);
  return out;
}

inline SavedZipModel parse_zip_model(std::string_view bytes) {
  detail::ByteReader in(bytes);
  require(std::memcmp(in.take(4).data(), kZipParamsMagic, 4) == 0, ErrorCode::CorruptFile, "bad magic at offset 0");
  const auto version = in.u32();
  require(version == 1, ErrorCode::CorruptFile, "unsupported version " + std::to_string(version) + " at offset 4");
  SavedZipModel m;
  const std::size_t c = in.u32(), nk = in.u32(), n = in.u32();
  const auto flags = in.u32();
  m.params.train_cache = (flags & 1u) != 0;
  m.params.train_zip = (flags & 2u) != 0;
  m.params.adapt_cache = (flags & 4u) != 0;
  m.config.beta = detail::get_f64(in);
  m.config.alpha = detail::get_f64(in);
  m.config.lambda = detail::get_f64(in);
  m.config.lr = detail::get_f64(in);
  m.config.iterations = in.u32();
  m.config.seed = detail::get_u64(in);
  for (std::size_t i = 0; i < n; ++i) m.classes.emplace_back(in.take(in.u32()));
  for (std::size_t i = 0; i < nk; ++i) {
    m.labels.push_back(in.u32());
    require(m.labels.back() < n, ErrorCode::CorruptFile, "label out of range at offset " + std::to_string(in.offset() - 4));
  }
  m.params.w = Tensor2<double>(c, c);
  for (auto& v : m.params.w.flat()) v = detail::get_f64(in);
  m.params.b.resize(c);
  for (auto& v : m.params.b) v = detail::get_f64(in);
  m.params.cache_features = Tensor2<double>(nk, c);
  for (auto& v : m.params.cache_features.flat()) v = detail::get_f64(in);
  require(in.at_end(), ErrorCode::CorruptFile, "trailing bytes at offset " + std::to_string(in.offset()));
  return m;
}

inline void write_zip_model(const std::filesystem::path& path, const SavedZipModel& m) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrorCode::IoError, "cannot write " + path.string());
  const auto bytes = serialize_zip_model(m);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  require(out.good(), ErrorCode::IoError, "write failed: " + path.string());
}

inline SavedZipModel read_zip_model(const std::filesystem::path& path) {
  return parse_zip_model(read_file_bytes(path));
}

}  // namespace mvrec

#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "mvrec/mvrec.hpp"

namespace mvrec::fixture {

class TempDir {
 public:
  explicit TempDir(const std::string& tag = "mvrec") {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            (tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::vector<double> gaussian(Rng& rng, std::size_t n, double scale = 1.0) {
  std::vector<double> v(n);
  for (auto& x : v) x = scale * rng.normal();
  return v;
}

inline Tensor2<double> gaussian_matrix(Rng& rng, std::size_t rows, std::size_t cols, double scale = 1.0) {
  Tensor2<double> m(rows, cols);
  for (auto& x : m.flat()) x = scale * rng.normal();
  return m;
}

/// Support cache and per-view batch for an N-way K-shot toy around random
/// class directions.
struct Toy {
  SupportCache cache;
  TrainingBatch batch;
};

inline Toy make_toy(std::size_t n, std::size_t k, std::size_t v, std::size_t c, std::uint64_t seed,
                    double spread = 0.6) {
  Rng rng(seed);
  const auto centers = gaussian_matrix(rng, n, c);
  Tensor2<double> feats(n * k, c);
  std::vector<std::size_t> labels;
  Toy toy;
  toy.batch.features = Tensor2<double>(n * k * v, c);
  std::size_t row = 0;
  for (std::size_t cls = 0; cls < n; ++cls)
    for (std::size_t s = 0; s < k; ++s) {
      const std::size_t i = cls * k + s;
      Tensor2<double> views(v, c);
      for (std::size_t j = 0; j < v; ++j)
        for (std::size_t d = 0; d < c; ++d) views(j, d) = centers(cls, d) + spread * rng.normal();
      const auto mean = column_mean(views);
      std::copy(mean.begin(), mean.end(), feats.row(i).begin());
      labels.push_back(cls);
      for (std::size_t j = 0; j < v; ++j, ++row) {
        std::copy(views.row(j).begin(), views.row(j).end(), toy.batch.features.row(row).begin());
        toy.batch.labels.push_back(cls);
      }
    }
  std::vector<std::string> classes;
  for (std::size_t cls = 0; cls < n; ++cls) classes.push_back("c" + std::to_string(cls));
  toy.cache = make_support_cache(std::move(feats), std::move(labels), std::move(classes));
  return toy;
}

/// Tiny MVTec-style tree:
///   widget: broken (3 images, one with two blobs -> 4 instances),
///           crack (3 images), speck (2 images, 1-pixel blobs), good, combined
///   gadget: dent (2 images), scratch (2 images)
inline void write_mvtec_fixture(const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  auto image = [&](const std::string& cat, const std::string& type, const std::string& stem,
                   const std::vector<Rect>& blobs, bool with_mask = true) {
    const fs::path test_dir = root / cat / "test" / type;
    fs::create_directories(test_dir);
    Image img(48, 40, 3, 90);
    write_png(test_dir / (stem + ".png"), img);
    if (!with_mask) return;
    const fs::path gt_dir = root / cat / "ground_truth" / type;
    fs::create_directories(gt_dir);
    Image mask(48, 40, 1, 0);
    for (const auto& r : blobs)
      for (int y = r.y; y < r.bottom(); ++y)
        for (int x = r.x; x < r.right(); ++x) mask.at(x, y) = 255;
    write_png(gt_dir / (stem + "_mask.png"), mask);
  };
  image("widget", "broken", "000", {{4, 4, 6, 5}});
  image("widget", "broken", "001", {{2, 2, 4, 4}, {30, 20, 5, 7}});
  image("widget", "broken", "002", {{10, 12, 8, 8}});
  image("widget", "crack", "000", {{20, 5, 3, 12}});
  image("widget", "crack", "001", {{1, 30, 9, 2}});
  image("widget", "crack", "002", {{40, 30, 6, 6}});
  image("widget", "speck", "000", {{7, 7, 1, 1}});
  image("widget", "speck", "001", {{9, 9, 1, 1}});
  image("widget", "good", "000", {}, false);
  image("widget", "combined", "000", {}, false);
  image("gadget", "dent", "000", {{5, 5, 5, 5}});
  image("gadget", "dent", "001", {{15, 15, 5, 5}});
  image("gadget", "scratch", "000", {{25, 5, 10, 2}});
  image("gadget", "scratch", "001", {{25, 25, 2, 10}});
}

}  // namespace mvrec::fixture

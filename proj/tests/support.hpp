#pragma once

#include <atomic>
#include <filesystem>
#include <string>
#include <vector>

#include <unistd.h>

#include "taskforge/image.hpp"
#include "taskforge/rng.hpp"

namespace testing {

using namespace taskforge;

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("taskforge_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
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

inline Image random_image(int w, int h, RngState& rng) {
  Image img(w, h);
  for (auto& v : img.pixels()) v = static_cast<std::uint8_t>(rng.uniform_index(256));
  return img;
}

inline SegMap random_segmap(int w, int h, int n_classes, RngState& rng) {
  std::vector<ClassId> ids(static_cast<std::size_t>(w) * h);
  for (auto& c : ids) c = static_cast<ClassId>(rng.uniform_index(static_cast<std::size_t>(n_classes) + 1));
  return SegMap(w, h, std::move(ids));
}

// Blobby class map: a few random rectangles painted over background.
inline SegMap random_blobs(int w, int h, int n_classes, RngState& rng) {
  std::vector<ClassId> ids(static_cast<std::size_t>(w) * h, 0);
  int n = 1 + static_cast<int>(rng.uniform_index(4));
  for (int i = 0; i < n; ++i) {
    int x0 = static_cast<int>(rng.uniform_index(w));
    int y0 = static_cast<int>(rng.uniform_index(h));
    int x1 = std::min(w - 1, x0 + static_cast<int>(rng.uniform_index(w / 2 + 1)));
    int y1 = std::min(h - 1, y0 + static_cast<int>(rng.uniform_index(h / 2 + 1)));
    auto c = static_cast<ClassId>(1 + rng.uniform_index(n_classes));
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) ids[y * w + x] = c;
  }
  return SegMap(w, h, std::move(ids));
}

// Independent 8-connected flood-fill count over a predicate.
template <typename Pred>
int count_components_8(int w, int h, Pred inside) {
  std::vector<char> seen(static_cast<std::size_t>(w) * h, 0);
  int count = 0;
  std::vector<std::pair<int, int>> stack;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!inside(x, y) || seen[y * w + x]) continue;
      ++count;
      stack.push_back({x, y});
      seen[y * w + x] = 1;
      while (!stack.empty()) {
        auto [cx, cy] = stack.back();
        stack.pop_back();
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            int nx = cx + dx, ny = cy + dy;
            if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
            if (seen[ny * w + nx] || !inside(nx, ny)) continue;
            seen[ny * w + nx] = 1;
            stack.push_back({nx, ny});
          }
      }
    }
  }
  return count;
}

}  // namespace testing

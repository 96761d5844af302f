#pragma once

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <string>
#include <vector>

#include "satirforge/label_map.hpp"
#include "satirforge/oracle.hpp"

namespace sftest {

namespace fs = std::filesystem;

/// Scratch directory removed on scope exit.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() /
            ("satirforge_test_" + std::to_string(::getpid()) + "_" +
             std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& s) const { return path_ / s; }

 private:
  fs::path path_;
};

inline std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void spit(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path());
  std::ofstream(p, std::ios::binary) << text;
}

inline satirforge::LabelMap labels(
    std::initializer_list<std::initializer_list<int>> rows) {
  const auto h = static_cast<std::uint32_t>(rows.size());
  const auto w = static_cast<std::uint32_t>(rows.begin()->size());
  satirforge::LabelMap lm(h, w);
  std::uint32_t r = 0;
  for (const auto& row : rows) {
    std::uint32_t c = 0;
    for (int v : row) lm.at(r, c++) = static_cast<std::uint8_t>(v);
    ++r;
  }
  return lm;
}

inline satirforge::BitMask bits(
    std::initializer_list<std::initializer_list<int>> rows) {
  const auto h = static_cast<std::uint32_t>(rows.size());
  const auto w = static_cast<std::uint32_t>(rows.begin()->size());
  satirforge::BitMask b(h, w);
  std::uint32_t r = 0;
  for (const auto& row : rows) {
    std::uint32_t c = 0;
    for (int v : row) b.set(r, c++, v != 0);
    ++r;
  }
  return b;
}

inline satirforge::BitMask random_bits(satirforge::SplitRng& rng,
                                       std::uint32_t h, std::uint32_t w,
                                       double density) {
  satirforge::BitMask b(h, w);
  for (std::size_t i = 0; i < b.size(); ++i) b[i] = rng.chance(density);
  return b;
}

inline satirforge::LabelMap random_labels(satirforge::SplitRng& rng,
                                          std::uint32_t h, std::uint32_t w,
                                          std::size_t classes,
                                          double ignore_rate = 0.0) {
  satirforge::LabelMap lm(h, w);
  for (std::size_t i = 0; i < lm.size(); ++i) {
    lm[i] = rng.chance(ignore_rate)
                ? satirforge::kIgnoreLabel
                : static_cast<std::uint8_t>(rng.uniform(0, classes - 1));
  }
  return lm;
}

}  // namespace sftest

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "satirforge/error.hpp"

namespace satirforge {

/// Largest supported image side, in pixels.
inline constexpr std::uint32_t kMaxDimension = 65535;

/// Dense row-major 2-D grid.
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(std::uint32_t height, std::uint32_t width, T fill = T{})
      : height_(height), width_(width),
        data_(static_cast<std::size_t>(height) * width, fill) {}

  std::uint32_t height() const { return height_; }
  std::uint32_t width() const { return width_; }
  std::size_t size() const { return data_.size(); }

  T& at(std::uint32_t row, std::uint32_t col) {
    return data_[static_cast<std::size_t>(row) * width_ + col];
  }
  const T& at(std::uint32_t row, std::uint32_t col) const {
    return data_[static_cast<std::size_t>(row) * width_ + col];
  }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }

  bool same_shape(const auto& other) const {
    return height_ == other.height() && width_ == other.width();
  }

  friend bool operator==(const Grid&, const Grid&) = default;

 protected:
  std::uint32_t height_ = 0;
  std::uint32_t width_ = 0;
  std::vector<T> data_;
};

using RealGrid = Grid<double>;

inline void check_dimensions(std::uint32_t height, std::uint32_t width) {
  if (height == 0 || width == 0 || height > kMaxDimension ||
      width > kMaxDimension) {
    throw DimensionMismatch("image dimensions must lie in [1, 65535], got " +
                            std::to_string(height) + "x" +
                            std::to_string(width));
  }
}

/// Binary mask. Cells hold 0 or 1; row/column addressable, row-major storage.
class BitMask : public Grid<std::uint8_t> {
 public:
  BitMask() = default;
  BitMask(std::uint32_t height, std::uint32_t width, bool fill = false)
      : Grid(height, width, fill ? 1 : 0) {
    check_dimensions(height, width);
  }

  bool test(std::uint32_t row, std::uint32_t col) const {
    return at(row, col) != 0;
  }
  void set(std::uint32_t row, std::uint32_t col, bool on = true) {
    at(row, col) = on ? 1 : 0;
  }
  std::uint64_t count() const {
    std::uint64_t n = 0;
    for (auto v : data_) n += v;
    return n;
  }
};

}  // namespace satirforge

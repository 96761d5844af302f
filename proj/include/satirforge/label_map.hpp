#pragma once

#include <array>
#include <cstdint>

#include "satirforge/grid.hpp"

namespace satirforge {

inline constexpr std::uint8_t kIgnoreLabel = 255;

/// Dense category-id map. 0 is background; `ignore_value` is reserved for
/// "do not score" pixels and is never emitted by composition.
class LabelMap : public Grid<std::uint8_t> {
 public:
  LabelMap() = default;
  LabelMap(std::uint32_t height, std::uint32_t width, std::uint8_t fill = 0,
           std::uint8_t ignore_value = kIgnoreLabel)
      : Grid(height, width, fill), ignore_value_(ignore_value) {
    check_dimensions(height, width);
  }

  std::uint8_t ignore_value() const { return ignore_value_; }

  friend bool operator==(const LabelMap&, const LabelMap&) = default;

 private:
  std::uint8_t ignore_value_ = kIgnoreLabel;
};

using LabelHistogram = std::array<std::uint64_t, 256>;

/// Pixel count per category id; sums to height * width.
LabelHistogram label_histogram(const LabelMap& lm);

}  // namespace satirforge

#include "satirforge/compose.hpp"

#include "satirforge/error.hpp"

namespace satirforge {

std::string_view to_string(OverlapPolicy policy) {
  switch (policy) {
    case OverlapPolicy::first_wins:
      return "first_wins";
  }
  return "unknown";
}

void ComposeConfig::validate() const {
  if (max_categories < 1 || max_categories > 254) {
    throw TooManyCategories("max_categories must lie in [1, 254], got " +
                            std::to_string(max_categories));
  }
}

LabelHistogram label_histogram(const LabelMap& lm) {
  LabelHistogram hist{};
  for (auto v : lm.values()) ++hist[v];
  return hist;
}

ComposeResult compose_label_map(std::span<const MaskRecord> ordered_masks,
                                std::uint32_t height, std::uint32_t width,
                                const ComposeConfig& cfg) {
  cfg.validate();
  ComposeResult result{LabelMap(height, width), 0, 0, 0};
  for (const auto& rec : ordered_masks) {
    if (rec.mask.height != height || rec.mask.width != width) {
      throw DimensionMismatch(
          "mask " + std::to_string(rec.source_index) + " is " +
          std::to_string(rec.mask.height) + "x" +
          std::to_string(rec.mask.width) + ", label map is " +
          std::to_string(height) + "x" + std::to_string(width));
    }
  }

  LabelMap& lm = result.labels;
  for (const auto& rec : ordered_masks) {
    if (rle_area(rec.mask) < cfg.min_mask_area) {
      ++result.masks_too_small;
      continue;
    }
    if (result.masks_used == cfg.max_categories) {
      ++result.masks_dropped;
      continue;
    }
    const auto category = static_cast<std::uint8_t>(++result.masks_used);
    for_each_foreground_segment(
        rec.mask, [&](std::uint32_t col, std::uint32_t r0, std::uint32_t r1) {
          for (std::uint32_t r = r0; r < r1; ++r) {
            auto& px = lm.at(r, col);
            if (px == 0) px = category;
          }
        });
  }
  return result;
}

}  // namespace satirforge

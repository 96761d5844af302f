#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>

#include "satirforge/ingest.hpp"
#include "satirforge/label_map.hpp"

namespace satirforge {

enum class OverlapPolicy { first_wins };

std::string_view to_string(OverlapPolicy policy);

struct ComposeConfig {
  std::size_t max_categories = 16;
  OverlapPolicy overlap = OverlapPolicy::first_wins;
  std::uint64_t min_mask_area = 0;

  /// Throws TooManyCategories when max_categories lies outside [1, 254].
  void validate() const;
};

struct ComposeResult {
  LabelMap labels;
  std::size_t masks_used = 0;
  std::size_t masks_dropped = 0;   // retained-eligible masks beyond K
  std::size_t masks_too_small = 0; // skipped by min_mask_area
};

/// Turns a ranked mask list into a pseudo-label map. The k-th retained mask
/// (1-based) paints category k on every pixel not already claimed by a
/// better-ranked mask; untouched pixels stay 0. Masks smaller than
/// min_mask_area are skipped without consuming a category id.
ComposeResult compose_label_map(std::span<const MaskRecord> ordered_masks,
                                std::uint32_t height, std::uint32_t width,
                                const ComposeConfig& cfg);

}  // namespace satirforge

#pragma once

// Teacher mask dumps: one JSON document per image holding a list of
// automatic-mask-generator records
//
//   [{"segmentation": {"size": [h, w], "counts": "..." | [int, ...]},
//     "predicted_iou": 0.97, "stability_score": 0.95, "area": 123,
//     "bbox": [x, y, w, h], ...}, ...]
//
// Unknown fields are ignored. An object with an "annotations" list is also
// accepted.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "satirforge/rle.hpp"

namespace satirforge {

struct MaskRecord {
  RleMask mask;
  double predicted_quality = 0.0;
  double stability = 0.0;
  std::uint64_t area = 0;
  BBox bbox;
  std::size_t source_index = 0;
};

enum class RankKey { predicted_quality, stability, area, source_order };

std::string_view to_string(RankKey key);
/// Throws std::invalid_argument on an unknown name.
RankKey parse_rank_key(std::string_view name);

struct RankPolicy {
  RankKey key = RankKey::predicted_quality;
  std::vector<RankKey> tie_breakers;
  double threshold = 0.88;
  std::size_t max_masks = 16;

  /// Throws std::invalid_argument when an invariant does not hold.
  void validate() const;
};

std::vector<MaskRecord> parse_mask_records(const nlohmann::json& doc,
                                           std::uint32_t image_height,
                                           std::uint32_t image_width);

/// Dimensions declared by the first record of a dump, if any.
std::optional<std::pair<std::uint32_t, std::uint32_t>> declared_size(
    const nlohmann::json& doc);

nlohmann::json load_json_file(const std::filesystem::path& path);

/// Serializes records back into the dump schema (compressed counts).
nlohmann::json mask_records_to_json(std::span<const MaskRecord> records);

std::vector<MaskRecord> filter_by_quality(std::span<const MaskRecord> records,
                                          double threshold);

std::vector<MaskRecord> rank_masks(std::span<const MaskRecord> records,
                                   const RankPolicy& policy);

}  // namespace satirforge

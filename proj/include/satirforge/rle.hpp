#pragma once

// COCO-compatible run-length masks.
//
// Runs are taken over pixels in column-major order (rows vary fastest within
// a column) and alternate zero/one, starting with a zero-run that may be
// empty. The compressed form packs each run (delta-coded against the run two
// positions back once i > 2) into 6-bit ASCII groups in [48, 111]: five
// payload bits plus a continuation bit, low bits first.

#include <algorithm>
#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "satirforge/grid.hpp"

namespace satirforge {

struct RleMask {
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  std::vector<std::uint64_t> runs;

  std::uint64_t pixel_count() const {
    return static_cast<std::uint64_t>(height) * width;
  }

  friend bool operator==(const RleMask&, const RleMask&) = default;
};

/// Pixel-space box: x = column, y = row.
struct BBox {
  std::uint32_t x = 0;
  std::uint32_t y = 0;
  std::uint32_t w = 0;
  std::uint32_t h = 0;

  friend bool operator==(const BBox&, const BBox&) = default;
};

/// Merges zero-length interior runs into their neighbours and drops trailing
/// zero runs. The leading zero-run is always kept.
RleMask normalize(RleMask m);

/// True when `m` satisfies every RleMask invariant (sum, no interior zeros).
bool is_normalized(const RleMask& m);

RleMask decode_counts_string(std::string_view s, std::uint32_t height,
                             std::uint32_t width);
std::string encode_counts_string(const RleMask& m);

/// Builds a mask from an uncompressed counts array (the `iscrowd` style of
/// COCO documents). Negative runs or a sum mismatch raise MalformedCounts.
RleMask rle_from_counts(std::span<const std::int64_t> counts,
                        std::uint32_t height, std::uint32_t width);

BitMask rle_to_bitmask(const RleMask& m);
RleMask bitmask_to_rle(const BitMask& b);

std::uint64_t rle_area(const RleMask& m);

/// Tight bounding box of the foreground; all zeros for an empty mask.
BBox rle_bbox(const RleMask& m);

/// Calls `fn(col, row_begin, row_end)` for every foreground segment, split at
/// column boundaries. Rows are half-open.
template <typename Fn>
void for_each_foreground_segment(const RleMask& m, Fn&& fn) {
  const std::uint64_t h = m.height;
  std::uint64_t pos = 0;
  for (std::size_t i = 0; i < m.runs.size(); ++i) {
    const std::uint64_t len = m.runs[i];
    if (i % 2 == 1) {
      std::uint64_t start = pos;
      const std::uint64_t end = pos + len;
      while (start < end) {
        const std::uint64_t col = start / h;
        const std::uint64_t row = start % h;
        const std::uint64_t stop = std::min(end, (col + 1) * h);
        fn(static_cast<std::uint32_t>(col), static_cast<std::uint32_t>(row),
           static_cast<std::uint32_t>(row + (stop - start)));
        start = stop;
      }
    }
    pos += len;
  }
}

}  // namespace satirforge

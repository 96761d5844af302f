#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "satirforge/label_map.hpp"

namespace satirforge {

/// Encodes a label map as an 8-bit grayscale PNG. Output bytes depend only on
/// the pixel values (fixed compression settings, no timestamps).
std::vector<std::uint8_t> encode_label_png(const LabelMap& lm);

/// Writes atomically: the bytes go to a sibling temp file that is renamed into
/// place. Parent directories are created. Throws IoError.
void write_label_png(const LabelMap& lm, const std::filesystem::path& path);

/// Reads an 8-bit single-channel PNG (grayscale or palette indices).
/// Throws IoError for unreadable, truncated or non-8-bit-single-channel files.
LabelMap read_label_png(const std::filesystem::path& path);
LabelMap decode_label_png(std::span<const std::uint8_t> bytes);

struct ImageSize {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  friend bool operator==(const ImageSize&, const ImageSize&) = default;
};

/// Reads width/height from the file header without decoding pixels.
/// Understands PNG, JPEG, BMP, TIFF and binary PNM; nullopt otherwise.
std::optional<ImageSize> probe_image_size(const std::filesystem::path& path);

/// Writes bytes to `path` via a temp file + rename. Throws IoError.
void write_file_atomic(const std::filesystem::path& path,
                       std::span<const std::uint8_t> bytes);

}  // namespace satirforge

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "satirforge/compose.hpp"
#include "satirforge/ingest.hpp"
#include "satirforge/manifest.hpp"

namespace satirforge {

struct PipelineConfig {
  std::filesystem::path masks_dir;
  /// Optional. When set, image sizes come from `<images_dir>/<stem>.<ext>`
  /// headers; otherwise from the size declared in each dump.
  std::filesystem::path images_dir;
  std::filesystem::path out_dir;
  RankPolicy rank;
  ComposeConfig compose;
  std::size_t workers = 0;
  std::string source_tag;
  bool tag_from_subdir = true;

  /// Throws std::invalid_argument on overlapping paths or bad policies.
  void validate() const;
};

struct ComposeSummary {
  std::size_t inputs = 0;
  std::size_t labels_written = 0;
  std::uint64_t masks_parsed = 0;
  std::uint64_t masks_below_threshold = 0;
  std::uint64_t masks_too_small = 0;
  std::uint64_t masks_dropped = 0;
  std::vector<std::string> failures;
  Manifest manifest;

  std::string summary_line() const;
};

/// Pseudo-labels every `<masks_dir>/<stem>.json` dump:
/// parse -> drop below threshold -> drop below min area -> rank (top K) ->
/// compose. Writes `<out_dir>/labels/<stem>.png` and
/// `<out_dir>/manifest.jsonl`. Per-image failures are collected, not thrown.
/// Output bytes do not depend on the worker count.
ComposeSummary run_compose(const PipelineConfig& cfg);

/// Label map for one dump document; the same steps run_compose applies.
struct ImageLabels {
  ComposeResult composed;
  std::uint64_t masks_parsed = 0;
  std::uint64_t masks_below_threshold = 0;
  std::uint64_t masks_dropped = 0;
};

ImageLabels label_one_image(const nlohmann::json& dump, std::uint32_t height,
                            std::uint32_t width, const RankPolicy& rank,
                            const ComposeConfig& compose);

}  // namespace satirforge

#pragma once

// Dataset index over (image, pseudo-label) pairs.
//
// On disk a manifest is line-delimited JSON: a header line carrying the
// format tag and the pipeline provenance, then one entry per line sorted by
// id. Keys are emitted in sorted order, so a manifest re-serializes to the
// same bytes.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "satirforge/compose.hpp"
#include "satirforge/ingest.hpp"
#include "satirforge/label_map.hpp"

namespace satirforge {

inline constexpr const char* kManifestFormat = "satirforge.manifest";
inline constexpr int kManifestVersion = 1;

struct ManifestEntry {
  std::string id;
  std::string image_path;
  std::string label_path;
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::uint32_t num_categories_used = 0;
  std::string source_tag;
  /// Masks that would have needed a category id beyond K. Only known when
  /// the entry was produced by composition.
  std::optional<std::uint64_t> masks_dropped;

  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

struct Manifest {
  std::vector<ManifestEntry> entries;
  /// Ranking / composition settings that produced the labels, or null.
  nlohmann::json provenance;
  /// Directory that relative entry paths resolve against. Not serialized.
  std::filesystem::path base_dir;

  std::filesystem::path resolve(const std::string& p) const;
};

nlohmann::json make_provenance(const RankPolicy& rank,
                               const ComposeConfig& compose);

/// Sorts entries by id; throws SchemaError on duplicate ids.
void canonicalize(Manifest& m);

std::string serialize_manifest(const Manifest& m);
/// Throws SchemaError on a malformed document, unsorted or duplicate ids.
Manifest parse_manifest(const std::string& text);

void write_manifest(const Manifest& m, const std::filesystem::path& path);
/// Sets base_dir to the manifest's directory.
Manifest read_manifest(const std::filesystem::path& path);

/// Rewrites relative entry paths so they resolve from `new_base`.
void rebase_manifest(Manifest& m, const std::filesystem::path& new_base);

/// Store `p` relative to `base` (lexically, after making both absolute).
std::string relative_to(const std::filesystem::path& p,
                        const std::filesystem::path& base);

/// Lists files below `dir` whose extension (case-insensitive, with dot) is in
/// `extensions`, keyed by relative path without extension ('/' separated).
/// Duplicate stems are reported through `duplicates`.
std::map<std::string, std::filesystem::path> scan_stems(
    const std::filesystem::path& dir, std::span<const std::string> extensions,
    std::vector<std::string>* duplicates = nullptr);

std::vector<std::string> default_image_extensions();

struct ManifestRules {
  std::string source_tag;
  /// Use the first directory component of the id as source tag when present.
  bool tag_from_subdir = true;
  std::vector<std::string> image_extensions = default_image_extensions();
  std::size_t workers = 0;
};

struct BuildResult {
  Manifest manifest;
  /// One line per stem found in only one tree, or whose label was unreadable.
  std::vector<std::string> unpaired;
};

/// Pairs `<image_dir>/<stem>.<ext>` with `<label_dir>/<stem>.png`. Paths are
/// stored relative to `base_dir`. Throws IoError when a directory cannot be
/// read.
BuildResult build_manifest(const std::filesystem::path& image_dir,
                           const std::filesystem::path& label_dir,
                           const ManifestRules& rules,
                           const std::filesystem::path& base_dir);

std::string source_tag_for(const std::string& id, const ManifestRules& rules);

/// Distinct category ids other than 0 and the ignore value.
std::uint32_t count_categories(const LabelMap& lm);

enum class FindingKind { dimension_mismatch, label_out_of_range, unreadable };

std::string_view to_string(FindingKind kind);

struct Finding {
  std::string id;
  FindingKind kind;
  std::string detail;
};

struct ValidationReport {
  std::size_t entries_checked = 0;
  std::vector<Finding> findings;
  nlohmann::json to_json() const;
};

ValidationReport validate_pairs(const Manifest& m, std::size_t num_classes,
                                std::size_t workers = 0);

/// FNV-1a over the id bytes mixed with the seed through the splitmix64
/// finalizer. Defines the split shuffle.
std::uint64_t split_key(const std::string& id, std::uint64_t seed);

/// Orders entries by split_key (ties by id) and slices consecutive runs of
/// floor(n * cumulative fraction). Each part is returned sorted by id.
/// Throws BadFractions unless every fraction is positive and they sum to at
/// most 1.
std::vector<Manifest> split_manifest(const Manifest& m,
                                     std::span<const double> fractions,
                                     std::uint64_t seed);

struct StatsReport {
  std::size_t images = 0;
  std::size_t images_read = 0;
  std::uint64_t total_pixels = 0;
  LabelHistogram category_pixels{};
  std::map<std::string, std::uint64_t> size_histogram;  // "WxH"
  std::map<std::string, std::uint64_t> source_tags;
  std::vector<std::string> errors;

  nlohmann::json to_json() const;
};

StatsReport dataset_stats(const Manifest& m, std::size_t workers = 0);

}  // namespace satirforge

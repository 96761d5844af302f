#include "satirforge/pipeline.hpp"

#include <algorithm>
#include <optional>
#include <stdexcept>

#include "satirforge/error.hpp"
#include "satirforge/image_io.hpp"
#include "satirforge/parallel.hpp"

namespace satirforge {

namespace fs = std::filesystem;

void PipelineConfig::validate() const {
  rank.validate();
  compose.validate();
  if (masks_dir.empty() || out_dir.empty()) {
    throw std::invalid_argument("masks and output directories are required");
  }
  const auto norm = [](const fs::path& p) {
    return fs::absolute(p).lexically_normal();
  };
  if (norm(masks_dir) == norm(out_dir) ||
      (!images_dir.empty() && (norm(images_dir) == norm(out_dir) ||
                               norm(images_dir) == norm(masks_dir)))) {
    throw std::invalid_argument("input and output directories must differ");
  }
}

std::string ComposeSummary::summary_line() const {
  return "compose: " + std::to_string(inputs) + " dumps, " +
         std::to_string(labels_written) + " labels written, " +
         std::to_string(failures.size()) + " failed, " +
         std::to_string(masks_parsed) + " masks parsed, " +
         std::to_string(masks_below_threshold) + " below threshold, " +
         std::to_string(masks_too_small) + " too small, " +
         std::to_string(masks_dropped) + " dropped beyond K";
}

ImageLabels label_one_image(const nlohmann::json& dump, std::uint32_t height,
                            std::uint32_t width, const RankPolicy& rank,
                            const ComposeConfig& compose) {
  ImageLabels out;
  const auto records = parse_mask_records(dump, height, width);
  out.masks_parsed = records.size();
  auto kept = filter_by_quality(records, rank.threshold);
  out.masks_below_threshold = records.size() - kept.size();
  // Small masks go before ranking so that lower-ranked masks can take the
  // freed category ids; composition would skip them the same way.
  const auto small = std::erase_if(kept, [&](const MaskRecord& r) {
    return r.area < compose.min_mask_area;
  });
  const std::size_t eligible = kept.size();
  const auto ranked = rank_masks(kept, rank);
  out.composed = compose_label_map(ranked, height, width, compose);
  out.composed.masks_too_small += small;
  out.masks_dropped = (eligible - ranked.size()) + out.composed.masks_dropped;
  return out;
}

ComposeSummary run_compose(const PipelineConfig& cfg) {
  cfg.validate();
  const std::vector<std::string> json_ext{".json"};
  const auto dumps = scan_stems(cfg.masks_dir, json_ext);
  std::map<std::string, fs::path> images;
  if (!cfg.images_dir.empty()) {
    images = scan_stems(cfg.images_dir, default_image_extensions());
  }
  const fs::path label_root = cfg.out_dir / "labels";
  ManifestRules rules;
  rules.source_tag = cfg.source_tag;
  rules.tag_from_subdir = cfg.tag_from_subdir;

  struct Outcome {
    std::optional<ManifestEntry> entry;
    std::string failure;
    ImageLabels stats;
  };
  std::vector<std::pair<std::string, fs::path>> work(dumps.begin(),
                                                     dumps.end());
  std::vector<Outcome> outcomes(work.size());

  parallel_for(work.size(), resolve_workers(cfg.workers), [&](std::size_t i) {
    const auto& [stem, dump_path] = work[i];
    Outcome& o = outcomes[i];
    try {
      const nlohmann::json doc = load_json_file(dump_path);
      std::optional<ImageSize> size;
      std::string image_path;
      if (auto it = images.find(stem); it != images.end()) {
        size = probe_image_size(it->second);
        if (!size) throw IoError("unrecognized image " + it->second.string());
        image_path = relative_to(it->second, cfg.out_dir);
      } else if (auto declared = declared_size(doc)) {
        size = ImageSize{declared->second, declared->first};
      }
      if (!size) {
        throw SchemaError("empty dump and no image to take the size from");
      }
      o.stats = label_one_image(doc, size->height, size->width, cfg.rank,
                                cfg.compose);
      const fs::path label_path = label_root / (stem + ".png");
      write_label_png(o.stats.composed.labels, label_path);

      ManifestEntry e;
      e.id = stem;
      e.image_path = image_path;
      e.label_path = relative_to(label_path, cfg.out_dir);
      e.width = size->width;
      e.height = size->height;
      // Same count build_manifest derives from the file, so a manifest
      // rebuilt over these labels agrees entry by entry.
      e.num_categories_used = count_categories(o.stats.composed.labels);
      e.source_tag = source_tag_for(stem, rules);
      e.masks_dropped = o.stats.masks_dropped;
      o.entry = std::move(e);
    } catch (const Error& e) {
      o.failure = stem + ": " + e.what();
    }
  });

  ComposeSummary summary;
  summary.inputs = work.size();
  summary.manifest.provenance = make_provenance(cfg.rank, cfg.compose);
  summary.manifest.base_dir = cfg.out_dir;
  for (auto& o : outcomes) {
    if (!o.entry) {
      summary.failures.push_back(std::move(o.failure));
      continue;
    }
    ++summary.labels_written;
    summary.masks_parsed += o.stats.masks_parsed;
    summary.masks_below_threshold += o.stats.masks_below_threshold;
    summary.masks_too_small += o.stats.composed.masks_too_small;
    summary.masks_dropped += o.stats.masks_dropped;
    summary.manifest.entries.push_back(std::move(*o.entry));
  }
  canonicalize(summary.manifest);
  write_manifest(summary.manifest, cfg.out_dir / "manifest.jsonl");
  return summary;
}

}  // namespace satirforge

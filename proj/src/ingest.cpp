#include "satirforge/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "satirforge/error.hpp"

namespace satirforge {

using nlohmann::json;

std::string_view to_string(RankKey key) {
  switch (key) {
    case RankKey::predicted_quality:
      return "predicted_quality";
    case RankKey::stability:
      return "stability";
    case RankKey::area:
      return "area";
    case RankKey::source_order:
      return "source_order";
  }
  return "unknown";
}

RankKey parse_rank_key(std::string_view name) {
  for (auto key : {RankKey::predicted_quality, RankKey::stability,
                   RankKey::area, RankKey::source_order}) {
    if (name == to_string(key)) return key;
  }
  throw std::invalid_argument("unknown rank key: " + std::string(name));
}

void RankPolicy::validate() const {
  if (std::find(tie_breakers.begin(), tie_breakers.end(), key) !=
      tie_breakers.end()) {
    throw std::invalid_argument("rank key may not repeat as a tie breaker");
  }
  if (!(threshold >= 0.0 && threshold <= 1.0)) {
    throw std::invalid_argument("quality threshold must lie in [0, 1]");
  }
  if (max_masks < 1) {
    throw std::invalid_argument("max_masks must be at least 1");
  }
}

namespace {

const json& record_list(const json& doc) {
  if (doc.is_array()) return doc;
  if (doc.is_object()) {
    auto it = doc.find("annotations");
    if (it != doc.end() && it->is_array()) return *it;
  }
  throw SchemaError("mask dump must be a list of mask objects");
}

// Missing, null, non-numeric and NaN scores all read as 0.
double score_field(const json& obj, const char* name) {
  auto it = obj.find(name);
  if (it == obj.end() || !it->is_number()) return 0.0;
  const double v = it->get<double>();
  if (std::isnan(v)) return 0.0;
  return std::clamp(v, 0.0, 1.0);
}

std::pair<std::uint32_t, std::uint32_t> parse_size(const json& seg,
                                                   std::size_t index) {
  auto it = seg.find("size");
  if (it == seg.end() || !it->is_array() || it->size() != 2 ||
      !(*it)[0].is_number_integer() || !(*it)[1].is_number_integer()) {
    throw SchemaError("mask " + std::to_string(index) +
                      ": segmentation.size must be [height, width]");
  }
  const auto h = (*it)[0].get<std::int64_t>();
  const auto w = (*it)[1].get<std::int64_t>();
  if (h <= 0 || w <= 0 || h > kMaxDimension || w > kMaxDimension) {
    throw DimensionMismatch("mask " + std::to_string(index) +
                            ": declared size out of range");
  }
  return {static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(w)};
}

RleMask parse_segmentation(const json& obj, std::size_t index,
                           std::uint32_t height, std::uint32_t width) {
  auto seg_it = obj.find("segmentation");
  if (seg_it == obj.end() || !seg_it->is_object()) {
    throw SchemaError("mask " + std::to_string(index) +
                      ": missing segmentation object");
  }
  const json& seg = *seg_it;
  const auto [h, w] = parse_size(seg, index);
  if (h != height || w != width) {
    throw DimensionMismatch(
        "mask " + std::to_string(index) + ": declared size " +
        std::to_string(h) + "x" + std::to_string(w) + " differs from image " +
        std::to_string(height) + "x" + std::to_string(width));
  }
  auto counts = seg.find("counts");
  if (counts == seg.end()) {
    throw SchemaError("mask " + std::to_string(index) +
                      ": segmentation has no counts");
  }
  try {
    if (counts->is_string()) {
      return decode_counts_string(counts->get_ref<const std::string&>(), h, w);
    }
    if (counts->is_array()) {
      std::vector<std::int64_t> runs;
      runs.reserve(counts->size());
      for (const auto& v : *counts) {
        if (!v.is_number_integer()) {
          throw MalformedCounts("non-integer entry in counts array");
        }
        runs.push_back(v.get<std::int64_t>());
      }
      return rle_from_counts(runs, h, w);
    }
  } catch (const MalformedCounts& e) {
    throw MalformedCounts("mask " + std::to_string(index) + ": " + e.what());
  }
  throw SchemaError("mask " + std::to_string(index) +
                    ": counts must be a string or an integer list");
}

}  // namespace

std::vector<MaskRecord> parse_mask_records(const json& doc,
                                           std::uint32_t image_height,
                                           std::uint32_t image_width) {
  check_dimensions(image_height, image_width);
  const json& list = record_list(doc);
  std::vector<MaskRecord> records;
  records.reserve(list.size());
  for (std::size_t i = 0; i < list.size(); ++i) {
    const json& obj = list[i];
    if (!obj.is_object()) {
      throw SchemaError("mask " + std::to_string(i) + " is not an object");
    }
    MaskRecord rec;
    rec.mask = parse_segmentation(obj, i, image_height, image_width);
    rec.predicted_quality = score_field(obj, "predicted_iou");
    rec.stability = score_field(obj, "stability_score");
    // Area and box are recomputed so they always agree with the mask.
    rec.area = rle_area(rec.mask);
    rec.bbox = rle_bbox(rec.mask);
    rec.source_index = i;
    records.push_back(std::move(rec));
  }
  return records;
}

std::optional<std::pair<std::uint32_t, std::uint32_t>> declared_size(
    const json& doc) {
  const json& list = record_list(doc);
  if (list.empty()) return std::nullopt;
  const json& obj = list[0];
  if (!obj.is_object() || !obj.contains("segmentation") ||
      !obj["segmentation"].is_object()) {
    throw SchemaError("mask 0: missing segmentation object");
  }
  return parse_size(obj["segmentation"], 0);
}

json load_json_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw SchemaError(path.string() + ": " + e.what());
  }
}

json mask_records_to_json(std::span<const MaskRecord> records) {
  json out = json::array();
  for (const auto& rec : records) {
    out.push_back({
        {"segmentation",
         {{"size", {rec.mask.height, rec.mask.width}},
          {"counts", encode_counts_string(rec.mask)}}},
        {"area", rec.area},
        {"bbox", {rec.bbox.x, rec.bbox.y, rec.bbox.w, rec.bbox.h}},
        {"predicted_iou", rec.predicted_quality},
        {"stability_score", rec.stability},
    });
  }
  return out;
}

std::vector<MaskRecord> filter_by_quality(std::span<const MaskRecord> records,
                                          double threshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) {
    throw std::invalid_argument("quality threshold must lie in [0, 1]");
  }
  std::vector<MaskRecord> kept;
  for (const auto& rec : records) {
    if (rec.predicted_quality >= threshold) kept.push_back(rec);
  }
  return kept;
}

namespace {

// Negative when `a` ranks before `b` under `key`.
int compare_on(RankKey key, const MaskRecord& a, const MaskRecord& b) {
  auto desc = [](auto x, auto y) { return x > y ? -1 : (x < y ? 1 : 0); };
  switch (key) {
    case RankKey::predicted_quality:
      return desc(a.predicted_quality, b.predicted_quality);
    case RankKey::stability:
      return desc(a.stability, b.stability);
    case RankKey::area:
      return desc(a.area, b.area);
    case RankKey::source_order:
      return -desc(a.source_index, b.source_index);
  }
  return 0;
}

}  // namespace

std::vector<MaskRecord> rank_masks(std::span<const MaskRecord> records,
                                   const RankPolicy& policy) {
  policy.validate();
  std::vector<MaskRecord> ranked(records.begin(), records.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [&](const MaskRecord& a, const MaskRecord& b) {
                     if (int c = compare_on(policy.key, a, b)) return c < 0;
                     for (auto tb : policy.tie_breakers) {
                       if (int c = compare_on(tb, a, b)) return c < 0;
                     }
                     return a.source_index < b.source_index;
                   });
  if (ranked.size() > policy.max_masks) ranked.resize(policy.max_masks);
  return ranked;
}

}  // namespace satirforge

#include "satirforge/manifest.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "satirforge/error.hpp"
#include "satirforge/image_io.hpp"
#include "satirforge/parallel.hpp"

namespace satirforge {

namespace fs = std::filesystem;
using nlohmann::json;

fs::path Manifest::resolve(const std::string& p) const {
  const fs::path path(p);
  if (path.is_absolute() || base_dir.empty()) return path;
  return base_dir / path;
}

json make_provenance(const RankPolicy& rank, const ComposeConfig& compose) {
  json tie = json::array();
  for (auto k : rank.tie_breakers) tie.push_back(std::string(to_string(k)));
  return {
      {"rank_key", std::string(to_string(rank.key))},
      {"rank_order", "descending key, then tie breakers, then source index"},
      {"tie_breakers", tie},
      {"quality_threshold", rank.threshold},
      {"max_masks", rank.max_masks},
      {"max_categories", compose.max_categories},
      {"min_mask_area", compose.min_mask_area},
      {"overlap_policy", std::string(to_string(compose.overlap))},
      {"category_rule",
       "k-th retained mask in ranked order is category k; uncovered pixels "
       "are 0"},
      {"excess_masks", "dropped beyond max_categories, counted per entry"},
      {"ignore_value", kIgnoreLabel},
  };
}

void canonicalize(Manifest& m) {
  std::sort(m.entries.begin(), m.entries.end(),
            [](const auto& a, const auto& b) { return a.id < b.id; });
  for (std::size_t i = 1; i < m.entries.size(); ++i) {
    if (m.entries[i].id == m.entries[i - 1].id) {
      throw SchemaError("duplicate manifest id: " + m.entries[i].id);
    }
  }
}

namespace {

json entry_to_json(const ManifestEntry& e) {
  json j = {{"id", e.id},
            {"image_path", e.image_path},
            {"label_path", e.label_path},
            {"width", e.width},
            {"height", e.height},
            {"num_categories_used", e.num_categories_used},
            {"source_tag", e.source_tag}};
  if (e.masks_dropped) j["masks_dropped"] = *e.masks_dropped;
  return j;
}

ManifestEntry entry_from_json(const json& j, std::size_t line) {
  try {
    ManifestEntry e;
    e.id = j.at("id").get<std::string>();
    e.image_path = j.at("image_path").get<std::string>();
    e.label_path = j.at("label_path").get<std::string>();
    e.width = j.at("width").get<std::uint32_t>();
    e.height = j.at("height").get<std::uint32_t>();
    e.num_categories_used = j.at("num_categories_used").get<std::uint32_t>();
    e.source_tag = j.at("source_tag").get<std::string>();
    if (j.contains("masks_dropped")) {
      e.masks_dropped = j["masks_dropped"].get<std::uint64_t>();
    }
    return e;
  } catch (const json::exception& ex) {
    throw SchemaError("manifest line " + std::to_string(line) + ": " +
                      ex.what());
  }
}

}  // namespace

std::string serialize_manifest(const Manifest& m) {
  std::string out;
  const json header = {{"format", kManifestFormat},
                       {"version", kManifestVersion},
                       {"entries", m.entries.size()},
                       {"provenance", m.provenance}};
  out += header.dump();
  out += '\n';
  for (const auto& e : m.entries) {
    out += entry_to_json(e).dump();
    out += '\n';
  }
  return out;
}

Manifest parse_manifest(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw SchemaError("manifest is empty");
  json header;
  try {
    header = json::parse(line);
  } catch (const json::parse_error& e) {
    throw SchemaError(std::string("manifest header: ") + e.what());
  }
  if (!header.is_object() || header.value("format", "") != kManifestFormat) {
    throw SchemaError("not a satirforge manifest");
  }
  if (header.value("version", 0) != kManifestVersion) {
    throw SchemaError("unsupported manifest version");
  }
  Manifest m;
  m.provenance = header.value("provenance", json());
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw SchemaError("manifest line " + std::to_string(line_no) + ": " +
                        e.what());
    }
    m.entries.push_back(entry_from_json(j, line_no));
  }
  for (std::size_t i = 1; i < m.entries.size(); ++i) {
    if (!(m.entries[i - 1].id < m.entries[i].id)) {
      throw SchemaError("manifest ids are not strictly ascending at " +
                        m.entries[i].id);
    }
  }
  if (header.contains("entries") &&
      header["entries"].get<std::size_t>() != m.entries.size()) {
    throw SchemaError("manifest header announces " +
                      header["entries"].dump() + " entries, found " +
                      std::to_string(m.entries.size()));
  }
  return m;
}

void write_manifest(const Manifest& m, const fs::path& path) {
  const std::string text = serialize_manifest(m);
  write_file_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(
                                        text.data()),
                                    text.size()));
}

Manifest read_manifest(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open manifest " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  Manifest m = parse_manifest(buf.str());
  m.base_dir = path.parent_path();
  return m;
}

void rebase_manifest(Manifest& m, const fs::path& new_base) {
  for (auto& e : m.entries) {
    if (!e.image_path.empty()) {
      e.image_path = relative_to(m.resolve(e.image_path), new_base);
    }
    e.label_path = relative_to(m.resolve(e.label_path), new_base);
  }
  m.base_dir = new_base;
}

std::string relative_to(const fs::path& p, const fs::path& base) {
  if (base.empty()) return p.generic_string();
  const fs::path abs_p = fs::absolute(p).lexically_normal();
  const fs::path abs_b = fs::absolute(base).lexically_normal();
  const fs::path rel = abs_p.lexically_relative(abs_b);
  return rel.empty() ? abs_p.generic_string() : rel.generic_string();
}

std::vector<std::string> default_image_extensions() {
  return {".png", ".jpg", ".jpeg", ".tif", ".tiff", ".bmp",
          ".pgm", ".ppm", ".pnm"};
}

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return s;
}

}  // namespace

std::map<std::string, fs::path> scan_stems(
    const fs::path& dir, std::span<const std::string> extensions,
    std::vector<std::string>* duplicates) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) {
    throw IoError("not a readable directory: " + dir.string());
  }
  std::vector<fs::path> files;
  fs::recursive_directory_iterator it(dir, ec), end;
  if (ec) throw IoError("cannot read " + dir.string() + ": " + ec.message());
  for (; it != end; it.increment(ec)) {
    if (ec) throw IoError("cannot read " + dir.string() + ": " + ec.message());
    if (!it->is_regular_file()) continue;
    const std::string ext = lower(it->path().extension().string());
    if (std::find(extensions.begin(), extensions.end(), ext) !=
        extensions.end()) {
      files.push_back(it->path());
    }
  }
  // Directory iteration order is unspecified; sort for determinism.
  std::sort(files.begin(), files.end());
  std::map<std::string, fs::path> stems;
  for (const auto& f : files) {
    fs::path rel = f.lexically_relative(dir);
    rel.replace_extension();
    const std::string stem = rel.generic_string();
    if (!stems.emplace(stem, f).second && duplicates) {
      duplicates->push_back(stem);
    }
  }
  return stems;
}

std::string source_tag_for(const std::string& id, const ManifestRules& rules) {
  if (rules.tag_from_subdir) {
    const auto slash = id.find('/');
    if (slash != std::string::npos) return id.substr(0, slash);
  }
  return rules.source_tag;
}

std::uint32_t count_categories(const LabelMap& lm) {
  const LabelHistogram hist = label_histogram(lm);
  std::uint32_t n = 0;
  for (std::size_t k = 1; k < hist.size(); ++k) {
    if (k != lm.ignore_value() && hist[k] > 0) ++n;
  }
  return n;
}

BuildResult build_manifest(const fs::path& image_dir, const fs::path& label_dir,
                           const ManifestRules& rules,
                           const fs::path& base_dir) {
  std::vector<std::string> dup_images;
  const auto images = scan_stems(image_dir, rules.image_extensions, &dup_images);
  const std::vector<std::string> png{".png"};
  const auto labels = scan_stems(label_dir, png);

  BuildResult result;
  for (const auto& stem : dup_images) {
    result.unpaired.push_back("duplicate image stem (first kept): " + stem);
  }
  std::vector<std::pair<std::string, std::pair<fs::path, fs::path>>> pairs;
  for (const auto& [stem, path] : images) {
    auto it = labels.find(stem);
    if (it == labels.end()) {
      result.unpaired.push_back("image without label: " + stem);
    } else {
      pairs.push_back({stem, {path, it->second}});
    }
  }
  for (const auto& [stem, path] : labels) {
    if (!images.contains(stem)) {
      result.unpaired.push_back("label without image: " + stem);
    }
  }

  std::vector<std::optional<ManifestEntry>> entries(pairs.size());
  std::vector<std::string> problems(pairs.size());
  parallel_for(pairs.size(), resolve_workers(rules.workers), [&](std::size_t i) {
    const auto& [stem, paths] = pairs[i];
    ManifestEntry e;
    e.id = stem;
    e.image_path = relative_to(paths.first, base_dir);
    e.label_path = relative_to(paths.second, base_dir);
    e.source_tag = source_tag_for(stem, rules);
    try {
      const LabelMap lm = read_label_png(paths.second);
      e.num_categories_used = count_categories(lm);
      e.width = lm.width();
      e.height = lm.height();
    } catch (const Error& err) {
      problems[i] = "unreadable label: " + stem + " (" + err.what() + ")";
      return;
    }
    if (auto size = probe_image_size(paths.first)) {
      e.width = size->width;
      e.height = size->height;
    }
    entries[i] = std::move(e);
  });

  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (entries[i]) {
      result.manifest.entries.push_back(std::move(*entries[i]));
    } else {
      result.unpaired.push_back(problems[i]);
    }
  }
  result.manifest.base_dir = base_dir;
  canonicalize(result.manifest);
  std::sort(result.unpaired.begin(), result.unpaired.end());
  return result;
}

std::string_view to_string(FindingKind kind) {
  switch (kind) {
    case FindingKind::dimension_mismatch:
      return "DimensionMismatch";
    case FindingKind::label_out_of_range:
      return "LabelOutOfRange";
    case FindingKind::unreadable:
      return "Unreadable";
  }
  return "Unknown";
}

json ValidationReport::to_json() const {
  json list = json::array();
  for (const auto& f : findings) {
    list.push_back({{"id", f.id},
                    {"kind", std::string(to_string(f.kind))},
                    {"detail", f.detail}});
  }
  return {{"entries_checked", entries_checked},
          {"findings", list},
          {"finding_count", findings.size()}};
}

ValidationReport validate_pairs(const Manifest& m, std::size_t num_classes,
                                std::size_t workers) {
  std::vector<std::vector<Finding>> per_entry(m.entries.size());
  parallel_for(m.entries.size(), resolve_workers(workers), [&](std::size_t i) {
    const ManifestEntry& e = m.entries[i];
    auto& out = per_entry[i];
    auto size_str = [](auto w, auto h) {
      return std::to_string(w) + "x" + std::to_string(h);
    };
    std::optional<ImageSize> image_size;
    if (!e.image_path.empty()) {
      image_size = probe_image_size(m.resolve(e.image_path));
      if (!image_size) {
        out.push_back({e.id, FindingKind::unreadable,
                       "image " + e.image_path + " is missing or unrecognized"});
      }
    }
    LabelMap lm;
    try {
      lm = read_label_png(m.resolve(e.label_path));
    } catch (const Error& err) {
      out.push_back({e.id, FindingKind::unreadable, err.what()});
      return;
    }
    const ImageSize label_size{lm.width(), lm.height()};
    if (image_size && !(*image_size == label_size)) {
      out.push_back({e.id, FindingKind::dimension_mismatch,
                     "image " + size_str(image_size->width, image_size->height) +
                         " vs label " + size_str(lm.width(), lm.height())});
    }
    if (label_size.width != e.width || label_size.height != e.height) {
      out.push_back({e.id, FindingKind::dimension_mismatch,
                     "manifest records " + size_str(e.width, e.height) +
                         ", label is " + size_str(lm.width(), lm.height())});
    }
    const LabelHistogram hist = label_histogram(lm);
    for (std::size_t k = num_classes; k < hist.size(); ++k) {
      if (k == lm.ignore_value() || hist[k] == 0) continue;
      out.push_back({e.id, FindingKind::label_out_of_range,
                     "label value " + std::to_string(k) + " on " +
                         std::to_string(hist[k]) + " pixels, classes = " +
                         std::to_string(num_classes)});
    }
  });
  ValidationReport report;
  report.entries_checked = m.entries.size();
  for (auto& list : per_entry) {
    for (auto& f : list) report.findings.push_back(std::move(f));
  }
  return report;
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x ^= x >> 30;
  x *= 0xBF58476D1CE4E5B9ULL;
  x ^= x >> 27;
  x *= 0x94D049BB133111EBULL;
  x ^= x >> 31;
  return x;
}

std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

}  // namespace

std::uint64_t split_key(const std::string& id, std::uint64_t seed) {
  return splitmix64(fnv1a64(id) + seed * 0x9E3779B97F4A7C15ULL);
}

std::vector<Manifest> split_manifest(const Manifest& m,
                                     std::span<const double> fractions,
                                     std::uint64_t seed) {
  if (fractions.empty()) throw BadFractions("no split fractions given");
  double total = 0.0;
  for (double f : fractions) {
    if (!(f > 0.0) || !std::isfinite(f)) {
      throw BadFractions("split fractions must be positive");
    }
    total += f;
  }
  if (total > 1.0 + 1e-9) {
    throw BadFractions("split fractions sum to more than 1");
  }

  std::vector<std::pair<std::uint64_t, const ManifestEntry*>> keyed;
  keyed.reserve(m.entries.size());
  for (const auto& e : m.entries) keyed.emplace_back(split_key(e.id, seed), &e);
  std::sort(keyed.begin(), keyed.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first < b.first : a.second->id < b.second->id;
  });

  const std::size_t n = keyed.size();
  std::vector<Manifest> parts;
  double cumulative = 0.0;
  std::size_t begin = 0;
  for (double f : fractions) {
    cumulative += f;
    // The epsilon absorbs representation error such as 0.1 + 0.2.
    const auto end = std::min(
        n, static_cast<std::size_t>(std::floor(cumulative * n + 1e-9)));
    Manifest part;
    part.provenance = m.provenance;
    part.base_dir = m.base_dir;
    for (std::size_t i = begin; i < std::max(begin, end); ++i) {
      part.entries.push_back(*keyed[i].second);
    }
    canonicalize(part);
    parts.push_back(std::move(part));
    begin = std::max(begin, end);
  }
  return parts;
}

json StatsReport::to_json() const {
  json pixels = json::object();
  json freq = json::object();
  for (std::size_t k = 0; k < category_pixels.size(); ++k) {
    if (category_pixels[k] == 0) continue;
    pixels[std::to_string(k)] = category_pixels[k];
    freq[std::to_string(k)] =
        static_cast<double>(category_pixels[k]) / static_cast<double>(total_pixels);
  }
  return {{"images", images},
          {"images_read", images_read},
          {"total_pixels", total_pixels},
          {"category_pixels", pixels},
          {"category_frequency", freq},
          {"size_histogram", size_histogram},
          {"source_tags", source_tags},
          {"errors", errors}};
}

StatsReport dataset_stats(const Manifest& m, std::size_t workers) {
  const std::size_t n = m.entries.size();
  std::vector<std::string> errors(n);
  std::vector<LabelHistogram> hists(n);
  std::vector<char> ok(n, 0);  // not vector<bool>: written concurrently
  std::vector<std::pair<std::uint32_t, std::uint32_t>> sizes(n);
  parallel_for(n, resolve_workers(workers), [&](std::size_t i) {
    try {
      const LabelMap lm = read_label_png(m.resolve(m.entries[i].label_path));
      hists[i] = label_histogram(lm);
      sizes[i] = {lm.width(), lm.height()};
      ok[i] = 1;
    } catch (const Error& e) {
      errors[i] = m.entries[i].id + ": " + e.what();
    }
  });

  StatsReport report;
  report.images = n;
  for (std::size_t i = 0; i < n; ++i) {
    ++report.source_tags[m.entries[i].source_tag];
    if (!ok[i]) {
      report.errors.push_back(errors[i]);
      continue;
    }
    ++report.images_read;
    for (std::size_t k = 0; k < 256; ++k) {
      report.category_pixels[k] += hists[i][k];
    }
    report.total_pixels +=
        static_cast<std::uint64_t>(sizes[i].first) * sizes[i].second;
    ++report.size_histogram[std::to_string(sizes[i].first) + "x" +
                            std::to_string(sizes[i].second)];
  }
  return report;
}

}  // namespace satirforge

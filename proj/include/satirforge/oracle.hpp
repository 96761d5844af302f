#pragma once

// Synthetic scenes and brute-force reference implementations. These are
// deliberately written in a different algorithmic shape from the engines
// they check (all-pairs scans, explicit 2-D windows, per-class pixel sets)
// and ship in the library so `satirforge selfcheck` can run anywhere.

#include <cstdint>
#include <filesystem>
#include <random>
#include <utility>
#include <vector>

#include "json.hpp"
#include "satirforge/ingest.hpp"
#include "satirforge/label_map.hpp"
#include "satirforge/metrics.hpp"

namespace satirforge {

/// Portable draws on top of mt19937_64 (whose output sequence is fixed by
/// the standard, unlike the std:: distributions).
class SplitRng {
 public:
  explicit SplitRng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  /// Uniform integer in [lo, hi].
  std::uint64_t uniform(std::uint64_t lo, std::uint64_t hi) {
    return lo + engine_() % (hi - lo + 1);
  }
  /// Uniform real in [0, 1).
  double unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  bool chance(double p) { return unit() < p; }

 private:
  std::mt19937_64 engine_;
};

enum class ShapeKind { rectangle, disk };

struct SynthShape {
  ShapeKind kind = ShapeKind::rectangle;
  // Rectangle: rows [top, bottom), cols [left, right).
  // Disk: centre (top, left), radius `radius`.
  std::uint32_t top = 0;
  std::uint32_t left = 0;
  std::uint32_t bottom = 0;
  std::uint32_t right = 0;
  std::uint32_t radius = 0;
  double quality = 0.0;

  bool contains(std::uint32_t row, std::uint32_t col) const;
  /// Half-open row/col span covering the shape, clipped to the image.
  void extent(std::uint32_t h, std::uint32_t w, std::uint32_t& r0,
              std::uint32_t& r1, std::uint32_t& c0, std::uint32_t& c1) const;
};

struct SynthParams {
  std::uint32_t min_height = 8;
  std::uint32_t max_height = 48;
  std::uint32_t min_width = 8;
  std::uint32_t max_width = 48;
  std::size_t min_shapes = 0;
  std::size_t max_shapes = 12;
  /// Distinct qualities are drawn from [min_quality, 1).
  double min_quality = 0.5;
  /// Draw qualities from a two-value set so that ranking ties occur.
  bool allow_ties = false;
  /// Skip the per-pixel expected_labels evaluation (large corpora).
  bool render_expected = true;
};

struct SynthScene {
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  /// In emitted (shuffled) order; shapes[i] produced records[i].
  std::vector<SynthShape> shapes;
  /// First-wins labels over shapes sorted by quality (descending, then by
  /// emitted position), evaluated geometrically pixel by pixel.
  LabelMap expected_labels;
};

std::pair<std::vector<MaskRecord>, SynthScene> synth_scene(
    std::uint64_t seed, const SynthParams& params = {});

/// All-pairs minimum Euclidean distance to the foreground, O(N * M).
RealGrid naive_edt(const BitMask& fg);
/// Column-major index of the nearest foreground pixel; ties to the smallest
/// index. All-pairs scan.
Grid<std::uint64_t> naive_nearest(const BitMask& fg);

/// F_beta^w straight from the definitional sums, with an explicit 2-D
/// Gaussian window renormalized over in-bounds taps.
double naive_wfb(const RealGrid& pred, const BitMask& gt,
                 const WfbParams& params = {});

/// mIoU from per-class pixel-set intersection and union counts.
double naive_miou(const LabelMap& pred, const LabelMap& gt,
                  std::size_t num_classes,
                  std::uint8_t ignore_value = kIgnoreLabel,
                  MiouPolicy policy = MiouPolicy::all_classes);

/// Writes a synthetic teacher corpus: `<root>/masks/<id>.json` dumps and
/// matching 8-bit `<root>/images/<id>.png` renderings, ids `synth_000000`...
/// Scene i uses seed `seed + i`, so the corpus is independent of `workers`.
/// Without images, compose takes the size declared in each dump.
void write_synth_corpus(const std::filesystem::path& root, std::size_t count,
                        const SynthParams& params, std::uint64_t seed,
                        std::size_t workers = 0, bool with_images = true);

struct SelfcheckConfig {
  std::uint64_t seed = 1;
  std::size_t trials = 100;
};

/// Oracle-vs-engine comparisons; `ok` is false when any check exceeds its
/// tolerance. Report fields: per check, trials, max deviation, tolerance.
struct SelfcheckReport {
  bool ok = true;
  nlohmann::json document;
};

SelfcheckReport run_selfcheck(const SelfcheckConfig& cfg);

}  // namespace satirforge

#include "satirforge/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <cstdio>

#include "satirforge/compose.hpp"
#include "satirforge/error.hpp"
#include "satirforge/image_io.hpp"
#include "satirforge/parallel.hpp"
#include "satirforge/rle.hpp"

namespace satirforge {

bool SynthShape::contains(std::uint32_t row, std::uint32_t col) const {
  if (kind == ShapeKind::rectangle) {
    return row >= top && row < bottom && col >= left && col < right;
  }
  const std::int64_t dr = static_cast<std::int64_t>(row) - top;
  const std::int64_t dc = static_cast<std::int64_t>(col) - left;
  const auto r = static_cast<std::int64_t>(radius);
  return dr * dr + dc * dc <= r * r;
}

void SynthShape::extent(std::uint32_t h, std::uint32_t w, std::uint32_t& r0,
                        std::uint32_t& r1, std::uint32_t& c0,
                        std::uint32_t& c1) const {
  if (kind == ShapeKind::rectangle) {
    r0 = top, r1 = std::min(bottom, h), c0 = left, c1 = std::min(right, w);
    return;
  }
  r0 = top > radius ? top - radius : 0;
  c0 = left > radius ? left - radius : 0;
  r1 = static_cast<std::uint32_t>(std::min<std::uint64_t>(
      h, std::uint64_t{top} + radius + 1));
  c1 = static_cast<std::uint32_t>(std::min<std::uint64_t>(
      w, std::uint64_t{left} + radius + 1));
}

std::pair<std::vector<MaskRecord>, SynthScene> synth_scene(
    std::uint64_t seed, const SynthParams& params) {
  SplitRng rng(seed);
  SynthScene scene;
  scene.height = static_cast<std::uint32_t>(
      rng.uniform(params.min_height, params.max_height));
  scene.width = static_cast<std::uint32_t>(
      rng.uniform(params.min_width, params.max_width));
  const auto count = static_cast<std::size_t>(
      rng.uniform(params.min_shapes, params.max_shapes));
  const std::uint32_t h = scene.height;
  const std::uint32_t w = scene.width;

  std::set<double> used;
  for (std::size_t i = 0; i < count; ++i) {
    SynthShape s;
    if (rng.chance(0.5)) {
      s.kind = ShapeKind::rectangle;
      s.top = static_cast<std::uint32_t>(rng.uniform(0, h - 1));
      s.left = static_cast<std::uint32_t>(rng.uniform(0, w - 1));
      s.bottom = static_cast<std::uint32_t>(rng.uniform(s.top + 1, h));
      s.right = static_cast<std::uint32_t>(rng.uniform(s.left + 1, w));
    } else {
      s.kind = ShapeKind::disk;
      s.top = static_cast<std::uint32_t>(rng.uniform(0, h - 1));
      s.left = static_cast<std::uint32_t>(rng.uniform(0, w - 1));
      s.radius = static_cast<std::uint32_t>(
          rng.uniform(0, std::max<std::uint32_t>(1, std::min(h, w) / 3)));
    }
    if (params.allow_ties) {
      s.quality = rng.chance(0.5) ? 0.9 : 0.95;
    } else {
      do {
        s.quality = params.min_quality + (1.0 - params.min_quality) * rng.unit();
      } while (!used.insert(s.quality).second);
    }
    scene.shapes.push_back(s);
  }

  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) {
    return scene.shapes[a].quality > scene.shapes[b].quality;
  });
  scene.expected_labels = LabelMap(h, w);
  for (std::uint32_t r = 0; params.render_expected && r < h; ++r) {
    for (std::uint32_t c = 0; c < w; ++c) {
      for (std::size_t rank = 0; rank < order.size(); ++rank) {
        if (scene.shapes[order[rank]].contains(r, c)) {
          scene.expected_labels.at(r, c) = static_cast<std::uint8_t>(rank + 1);
          break;
        }
      }
    }
  }

  std::vector<MaskRecord> records;
  records.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const SynthShape& s = scene.shapes[i];
    BitMask bits(h, w);
    std::uint32_t r0, r1, c0, c1;
    s.extent(h, w, r0, r1, c0, c1);
    for (std::uint32_t r = r0; r < r1; ++r) {
      for (std::uint32_t c = c0; c < c1; ++c) {
        if (s.contains(r, c)) bits.set(r, c);
      }
    }
    MaskRecord rec;
    rec.mask = bitmask_to_rle(bits);
    rec.predicted_quality = s.quality;
    rec.stability = rng.unit();
    rec.area = rle_area(rec.mask);
    rec.bbox = rle_bbox(rec.mask);
    rec.source_index = i;
    records.push_back(std::move(rec));
  }
  return {std::move(records), std::move(scene)};
}

void write_synth_corpus(const std::filesystem::path& root, std::size_t count,
                        const SynthParams& params, std::uint64_t seed,
                        std::size_t workers, bool with_images) {
  SynthParams p = params;
  p.render_expected = p.render_expected && with_images;
  parallel_for(count, resolve_workers(workers), [&](std::size_t i) {
    char id[32];
    std::snprintf(id, sizeof id, "synth_%06zu", i);
    const auto [records, scene] = synth_scene(seed + i, p);
    const std::string text = mask_records_to_json(records).dump();
    write_file_atomic(root / "masks" / (std::string(id) + ".json"),
                      std::span(reinterpret_cast<const std::uint8_t*>(text.data()),
                                text.size()));
    if (!with_images) return;
    // Flat intensity per region stands in for a thermal frame.
    LabelMap image(scene.height, scene.width);
    for (std::size_t p = 0; p < image.size(); ++p) {
      const std::uint8_t k = scene.expected_labels[p];
      image[p] = static_cast<std::uint8_t>(k == 0 ? 24 : 40 + (k * 37) % 200);
    }
    write_label_png(image, root / "images" / (std::string(id) + ".png"));
  });
}

namespace {

std::vector<std::pair<std::uint32_t, std::uint32_t>> foreground_pixels(
    const BitMask& fg) {
  // Column-major enumeration, so the first minimum found has the smallest
  // column-major index.
  std::vector<std::pair<std::uint32_t, std::uint32_t>> px;
  for (std::uint32_t c = 0; c < fg.width(); ++c) {
    for (std::uint32_t r = 0; r < fg.height(); ++r) {
      if (fg.test(r, c)) px.emplace_back(r, c);
    }
  }
  if (px.empty()) throw EmptyForeground("naive EDT needs a foreground pixel");
  return px;
}

template <typename Fn>
void scan_nearest(const BitMask& fg, Fn&& emit) {
  const auto px = foreground_pixels(fg);
  for (std::uint32_t r = 0; r < fg.height(); ++r) {
    for (std::uint32_t c = 0; c < fg.width(); ++c) {
      std::int64_t best = std::numeric_limits<std::int64_t>::max();
      std::size_t best_i = 0;
      for (std::size_t i = 0; i < px.size(); ++i) {
        const std::int64_t dr = static_cast<std::int64_t>(r) - px[i].first;
        const std::int64_t dc = static_cast<std::int64_t>(c) - px[i].second;
        const std::int64_t d2 = dr * dr + dc * dc;
        if (d2 < best) {
          best = d2;
          best_i = i;
        }
      }
      emit(r, c, best, px[best_i]);
    }
  }
}

}  // namespace

RealGrid naive_edt(const BitMask& fg) {
  RealGrid out(fg.height(), fg.width());
  scan_nearest(fg, [&](auto r, auto c, std::int64_t d2, auto) {
    out.at(r, c) = std::sqrt(static_cast<double>(d2));
  });
  return out;
}

Grid<std::uint64_t> naive_nearest(const BitMask& fg) {
  Grid<std::uint64_t> out(fg.height(), fg.width());
  const std::uint64_t h = fg.height();
  scan_nearest(fg, [&](auto r, auto c, std::int64_t, auto p) {
    out.at(r, c) = p.second * h + p.first;
  });
  return out;
}

double naive_wfb(const RealGrid& pred, const BitMask& gt,
                 const WfbParams& params) {
  const std::uint32_t h = gt.height();
  const std::uint32_t w = gt.width();
  double g = 0.0;
  bool pred_zero = true;
  for (std::uint32_t r = 0; r < h; ++r) {
    for (std::uint32_t c = 0; c < w; ++c) {
      g += gt.test(r, c) ? 1.0 : 0.0;
      if (pred.at(r, c) != 0.0) pred_zero = false;
    }
  }
  if (g == 0.0) return pred_zero ? 1.0 : 0.0;

  const RealGrid dist = naive_edt(gt);
  const Grid<std::uint64_t> nearest = naive_nearest(gt);
  auto err = [&](std::uint32_t r, std::uint32_t c) {
    return std::abs(pred.at(r, c) - (gt.test(r, c) ? 1.0 : 0.0));
  };
  auto borrowed = [&](std::uint32_t r, std::uint32_t c) {
    if (gt.test(r, c)) return err(r, c);
    const std::uint64_t idx = nearest.at(r, c);
    return err(static_cast<std::uint32_t>(idx % h),
               static_cast<std::uint32_t>(idx / h));
  };

  const int radius = params.kernel_size / 2;
  const double two_s2 = 2.0 * params.kernel_sigma * params.kernel_sigma;
  double fg_sum = 0.0;
  double bg_sum = 0.0;
  for (std::uint32_t r = 0; r < h; ++r) {
    for (std::uint32_t c = 0; c < w; ++c) {
      const double e = err(r, c);
      if (!gt.test(r, c)) {
        bg_sum += e * (2.0 - std::exp(params.decay * dist.at(r, c)));
        continue;
      }
      double num = 0.0;
      double den = 0.0;
      for (int dy = -radius; dy <= radius; ++dy) {
        for (int dx = -radius; dx <= radius; ++dx) {
          const std::int64_t rr = static_cast<std::int64_t>(r) + dy;
          const std::int64_t cc = static_cast<std::int64_t>(c) + dx;
          if (rr < 0 || cc < 0 || rr >= h || cc >= w) continue;
          const double k = std::exp(-(dy * dy + dx * dx) / two_s2);
          num += k * borrowed(static_cast<std::uint32_t>(rr),
                              static_cast<std::uint32_t>(cc));
          den += k;
        }
      }
      fg_sum += std::min(e, num / den);
    }
  }

  const double tp = g - fg_sum;
  const double recall = 1.0 - fg_sum / g;
  const double precision = tp + bg_sum > 0.0 ? tp / (tp + bg_sum) : 0.0;
  const double b2 = params.beta * params.beta;
  const double denom = b2 * precision + recall;
  if (denom <= 0.0) return 0.0;
  return std::clamp((1.0 + b2) * precision * recall / denom, 0.0, 1.0);
}

double naive_miou(const LabelMap& pred, const LabelMap& gt,
                  std::size_t num_classes, std::uint8_t ignore_value,
                  MiouPolicy policy) {
  double sum = 0.0;
  std::size_t present = 0;
  std::uint64_t scored = 0;
  for (std::size_t k = 0; k < num_classes; ++k) {
    std::uint64_t inter = 0;
    std::uint64_t uni = 0;
    for (std::size_t i = 0; i < gt.size(); ++i) {
      if (gt[i] == ignore_value) continue;
      const bool in_gt = gt[i] == k;
      const bool in_pred = pred[i] == k;
      inter += in_gt && in_pred;
      uni += in_gt || in_pred;
    }
    if (k == 0) {
      for (std::size_t i = 0; i < gt.size(); ++i) scored += gt[i] != ignore_value;
    }
    if (uni == 0) continue;
    sum += static_cast<double>(inter) / static_cast<double>(uni);
    ++present;
  }
  if (scored == 0) throw EmptyEvaluation("no scorable pixels");
  return sum / static_cast<double>(
                   policy == MiouPolicy::all_classes ? num_classes : present);
}

namespace {

BitMask random_bits(SplitRng& rng, std::uint32_t h, std::uint32_t w,
                    bool nonempty) {
  BitMask b(h, w);
  const double density = rng.unit();
  for (std::size_t i = 0; i < b.size(); ++i) b[i] = rng.chance(density);
  if (nonempty && b.count() == 0) {
    b[rng.uniform(0, b.size() - 1)] = 1;
  }
  return b;
}

nlohmann::json check_entry(std::size_t trials, double max_dev, double tol) {
  return {{"trials", trials},
          {"max_deviation", max_dev},
          {"tolerance", tol},
          {"pass", max_dev <= tol}};
}

}  // namespace

SelfcheckReport run_selfcheck(const SelfcheckConfig& cfg) {
  SplitRng rng(cfg.seed);
  SelfcheckReport report;
  nlohmann::json checks = nlohmann::json::object();

  // RLE: decode(encode(m)) and area vs popcount; deviation counts failures.
  double rle_fail = 0.0;
  for (std::size_t t = 0; t < cfg.trials; ++t) {
    const auto h = static_cast<std::uint32_t>(rng.uniform(1, 40));
    const auto w = static_cast<std::uint32_t>(rng.uniform(1, 40));
    const BitMask b = random_bits(rng, h, w, false);
    const RleMask m = bitmask_to_rle(b);
    const RleMask back = decode_counts_string(encode_counts_string(m), h, w);
    if (!(back == m) || !(rle_to_bitmask(back) == b) ||
        rle_area(m) != b.count()) {
      rle_fail += 1.0;
    }
  }
  checks["rle_round_trip"] = check_entry(cfg.trials, rle_fail, 0.0);

  double edt_dev = 0.0;
  for (std::size_t t = 0; t < cfg.trials; ++t) {
    const BitMask b = random_bits(rng, 24, 24, true);
    const auto fast = euclidean_distance_transform(b);
    const auto slow = naive_edt(b);
    const auto slow_idx = naive_nearest(b);
    for (std::size_t i = 0; i < b.size(); ++i) {
      edt_dev = std::max(edt_dev, std::abs(fast.dist[i] - slow[i]));
      if (fast.nearest[i] != slow_idx[i]) edt_dev = std::max(edt_dev, 1.0);
    }
  }
  checks["edt_vs_naive"] = check_entry(cfg.trials, edt_dev, 0.0);

  double miou_dev = 0.0;
  for (std::size_t t = 0; t < cfg.trials; ++t) {
    const auto c = static_cast<std::size_t>(rng.uniform(2, 8));
    LabelMap pred(16, 16);
    LabelMap gt(16, 16);
    for (std::size_t i = 0; i < gt.size(); ++i) {
      pred[i] = static_cast<std::uint8_t>(rng.uniform(0, c - 1));
      gt[i] = rng.chance(0.1) ? kIgnoreLabel
                              : static_cast<std::uint8_t>(rng.uniform(0, c - 1));
    }
    try {
      const double fast =
          miou(accumulate_confusion(pred, gt, c), MiouPolicy::all_classes).miou;
      miou_dev = std::max(miou_dev, std::abs(fast - naive_miou(pred, gt, c)));
    } catch (const EmptyEvaluation&) {
    }
  }
  checks["miou_vs_naive"] = check_entry(cfg.trials, miou_dev, 0.0);

  double wfb_dev = 0.0;
  for (std::size_t t = 0; t < cfg.trials; ++t) {
    const BitMask gt = random_bits(rng, 32, 32, true);
    RealGrid pred(32, 32);
    const bool soft = t % 2 == 1;
    for (std::size_t i = 0; i < pred.size(); ++i) {
      pred[i] = soft ? rng.unit() : (rng.chance(0.5) ? 1.0 : 0.0);
    }
    wfb_dev = std::max(wfb_dev, std::abs(weighted_fbeta_binary(pred, gt) -
                                         naive_wfb(pred, gt)));
  }
  checks["wfb_vs_naive"] = check_entry(cfg.trials, wfb_dev, 1e-9);

  double compose_fail = 0.0;
  RankPolicy policy;
  policy.threshold = 0.0;
  policy.max_masks = 254;
  ComposeConfig compose_cfg;
  compose_cfg.max_categories = 254;
  for (std::size_t t = 0; t < cfg.trials; ++t) {
    const auto [records, scene] = synth_scene(rng.next());
    const auto ranked = rank_masks(records, policy);
    const auto got =
        compose_label_map(ranked, scene.height, scene.width, compose_cfg);
    if (!(got.labels == scene.expected_labels)) compose_fail += 1.0;
  }
  checks["compose_vs_synth"] = check_entry(cfg.trials, compose_fail, 0.0);

  for (const auto& [name, entry] : checks.items()) {
    if (!entry["pass"].get<bool>()) report.ok = false;
  }
  report.document = {{"seed", cfg.seed}, {"checks", checks}, {"ok", report.ok}};
  return report;
}

}  // namespace satirforge

// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails.
//
//   satirforge_acceptance [--scale-images N]
//
// The CLI binary path and the fixture directory are baked in at build time.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <sys/wait.h>

#include "satirforge/compose.hpp"
#include "satirforge/evaluate.hpp"
#include "satirforge/image_io.hpp"
#include "satirforge/manifest.hpp"
#include "satirforge/metrics.hpp"
#include "satirforge/oracle.hpp"
#include "satirforge/parallel.hpp"
#include "satirforge/pipeline.hpp"
#include "satirforge/rle.hpp"
#include "support.hpp"

using namespace satirforge;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

int run_cli(const std::string& args) {
  const std::string cmd =
      std::string(SATIRFORGE_CLI) + " " + args + " > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

// Every file below `dir`, keyed by relative path.
std::map<std::string, std::string> tree_bytes(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) {
      out[e.path().lexically_relative(dir).generic_string()] =
          sftest::slurp(e.path());
    }
  }
  return out;
}

// 1. The evaluation surface: prediction/GT directories in, mIoU and
// F_beta^w out, through the CLI and its JSON report.
Outcome evaluation_surface() {
  sftest::TempDir tmp;
  SplitRng rng(2024);
  for (int i = 0; i < 6; ++i) {
    const LabelMap gt = sftest::random_labels(rng, 24, 32, 21, 0.05);
    LabelMap pred = gt;
    for (auto& v : pred.values()) {
      if (v == kIgnoreLabel || rng.chance(0.15)) {
        v = static_cast<std::uint8_t>(rng.uniform(0, 20));
      }
    }
    write_label_png(gt, tmp / ("gt/" + std::to_string(i) + ".png"));
    write_label_png(pred, tmp / ("pred/" + std::to_string(i) + ".png"));
  }
  const fs::path report = tmp / "report.json";
  const int rc = run_cli("eval --pred-dir " + q(tmp / "pred") + " --gt-dir " +
                         q(tmp / "gt") + " --classes 21 --report " + q(report));
  if (rc != 0) return {false, fmt("satirforge eval exited %d", rc)};
  const auto doc = nlohmann::json::parse(sftest::slurp(report));
  EvalConfig cfg;
  cfg.num_classes = 21;
  const EvalReport direct = evaluate(tmp / "pred", tmp / "gt", cfg);
  const double m = doc["miou"], w = doc["macro_wfb"];
  const bool ok = doc["images_evaluated"] == 6 && m == direct.miou &&
                  w == direct.macro_wfb && m > 0 && m <= 1 && w > 0 && w <= 1;
  return {ok, fmt("mIoU %.4f, F_beta^w %.4f over 6 image pairs with 21 "
                  "classes (published trained-model scores need external data "
                  "and GPU training; not reproduced)",
                  m, w)};
}

// 2. RLE codec against reference-codec fixtures.
Outcome rle_conformance() {
  const auto t0 = Clock::now();
  std::ifstream in(SATIRFORGE_TEST_DATA "/rle_golden.txt");
  std::uint32_t h, w;
  std::string hex, counts;
  std::size_t n = 0, bad = 0;
  std::uint32_t max_h = 0, max_w = 0;
  while (in >> h >> w >> hex >> counts) {
    ++n;
    max_h = std::max(max_h, h), max_w = std::max(max_w, w);
    try {
      const RleMask m = decode_counts_string(counts, h, w);
      const BitMask b = rle_to_bitmask(m);
      bool same = true;
      for (std::uint32_t c = 0; c < w; ++c) {
        for (std::uint32_t r = 0; r < h; ++r) {
          const std::size_t i = std::size_t{c} * h + r;
          const char ch = hex[i / 4];
          const int nib = ch <= '9' ? ch - '0' : ch - 'a' + 10;
          same = same && b.test(r, c) == bool((nib >> (3 - i % 4)) & 1);
        }
      }
      if (!same || encode_counts_string(m) != counts ||
          encode_counts_string(bitmask_to_rle(b)) != counts) {
        ++bad;
      }
    } catch (const Error&) {
      ++bad;
    }
  }
  const double secs = seconds_since(t0);
  return {n >= 1000 && bad == 0 && secs < 5.0,
          fmt("%zu pairs up to %ux%u, %zu mismatches, %.2f s (limit 5 s)", n,
              max_h, max_w, bad, secs)};
}

// 3. mIoU equals the pixel-set oracle exactly.
Outcome miou_oracle() {
  SplitRng rng(3);
  std::size_t bad = 0;
  for (int t = 0; t < 500; ++t) {
    const std::size_t classes = rng.uniform(2, 8);
    const LabelMap gt = sftest::random_labels(rng, 16, 16, classes, 0.15);
    const LabelMap pred = sftest::random_labels(rng, 16, 16, classes);
    for (auto policy : {MiouPolicy::all_classes, MiouPolicy::present_classes}) {
      const double fast =
          miou(accumulate_confusion(pred, gt, classes), policy).miou;
      if (fast != naive_miou(pred, gt, classes, kIgnoreLabel, policy)) ++bad;
    }
  }
  const LabelMap pred = sftest::labels({{0, 1}, {1, 1}});
  const LabelMap gt = sftest::labels({{0, 1}, {0, 1}});
  const double worked = miou(accumulate_confusion(pred, gt, 2),
                             MiouPolicy::all_classes).miou;
  const bool seven_twelfths = std::abs(worked - 7.0 / 12.0) < 1e-15 &&
                              worked == naive_miou(pred, gt, 2);
  return {bad == 0 && seven_twelfths,
          fmt("500 cases x 2 policies, %zu differ (tolerance 0); worked "
              "example %.6f (7/12)",
              bad, worked)};
}

// 4. F_beta^w and EDT against brute-force oracles.
Outcome wfb_oracle() {
  SplitRng rng(4);
  double max_dev = 0.0, max_perfect_dev = 0.0;
  bool miss_exact = true;
  for (int t = 0; t < 100; ++t) {
    const BitMask gt = sftest::random_bits(rng, 32, 32, 0.05 + 0.6 * rng.unit());
    RealGrid pred(32, 32);
    const bool binary = t % 2 == 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
      pred[i] = binary ? double(rng.chance(0.5) ? gt[i] : rng.chance(0.3))
                       : rng.unit();
    }
    max_dev = std::max(max_dev,
                       std::abs(weighted_fbeta_binary(pred, gt) - naive_wfb(pred, gt)));
    if (gt.count() > 0) {
      RealGrid perfect(32, 32);
      for (std::size_t i = 0; i < gt.size(); ++i) perfect[i] = gt[i];
      max_perfect_dev = std::max(
          max_perfect_dev, std::abs(weighted_fbeta_binary(perfect, gt) - 1.0));
      miss_exact = miss_exact && weighted_fbeta_binary(RealGrid(32, 32), gt) == 0.0;
    }
  }
  std::size_t edt_bad = 0;
  for (int t = 0; t < 200; ++t) {
    BitMask fg = sftest::random_bits(rng, 24, 24, 0.02 + 0.3 * rng.unit());
    fg.set(static_cast<std::uint32_t>(rng.uniform(0, 23)),
           static_cast<std::uint32_t>(rng.uniform(0, 23)));
    const auto dt = euclidean_distance_transform(fg);
    if (!(dt.dist == naive_edt(fg)) || !(dt.nearest == naive_nearest(fg))) {
      ++edt_bad;
    }
  }
  return {max_dev <= 1e-9 && max_perfect_dev <= 1e-12 && miss_exact &&
              edt_bad == 0,
          fmt("max |engine - oracle| %.2e (limit 1e-9), perfect within "
              "%.1e, miss exactly 0: %s, EDT mismatches %zu/200",
              max_dev, max_perfect_dev, miss_exact ? "yes" : "no", edt_bad)};
}

// 5. Composition equals the geometric first-wins oracle.
Outcome composition_oracle() {
  std::size_t bad = 0, overlaps = 0, seventh = 0;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    SynthParams params;
    params.allow_ties = seed % 4 == 0;
    const auto [records, scene] = synth_scene(10'000 + seed, params);
    RankPolicy rank;
    rank.threshold = 0.0;
    rank.max_masks = 254;
    ComposeConfig cfg;
    cfg.max_categories = 254;
    const auto ranked = rank_masks(records, rank);
    const auto res = compose_label_map(ranked, scene.height, scene.width, cfg);
    if (!(res.labels == scene.expected_labels)) ++bad;
    const LabelHistogram hist = label_histogram(res.labels);
    std::uint64_t area = 0;
    for (const auto& r : records) area += r.area;
    if (area > res.labels.size() - hist[0]) ++overlaps;
    if (hist[7] > 0) ++seventh;
  }
  return {bad == 0,
          fmt("1000 scenes, %zu mismatches; %zu scenes with overlapping "
              "masks, %zu with a category-7 region",
              bad, overlaps, seventh)};
}

// 6. Worker count does not change output bytes; reruns are idempotent.
Outcome determinism() {
  sftest::TempDir tmp;
  SynthParams params;
  params.min_height = params.max_height = 96;
  params.min_width = params.max_width = 128;
  params.min_shapes = 4;
  params.max_shapes = 20;
  params.min_quality = 0.8;
  write_synth_corpus(tmp.path(), 100, params, 600, 0);
  std::map<std::string, std::string> first;
  std::string detail;
  bool ok = true;
  for (int workers : {1, 4, 8}) {
    const fs::path out = tmp / ("out" + std::to_string(workers));
    const int rc = run_cli("compose --masks-dir " + q(tmp / "masks") +
                           " --images-dir " + q(tmp / "images") +
                           " --out-dir " + q(out) + " --workers " +
                           std::to_string(workers));
    const auto bytes = tree_bytes(out);
    if (rc != 0 || bytes.size() != 101) ok = false;
    if (first.empty()) {
      first = bytes;
    } else if (bytes != first) {
      ok = false;
    }
  }
  const int rc = run_cli("compose --masks-dir " + q(tmp / "masks") +
                         " --images-dir " + q(tmp / "images") + " --out-dir " +
                         q(tmp / "out1") + " --workers 3");
  const bool idempotent = rc == 0 && tree_bytes(tmp / "out1") == first;
  return {ok && idempotent,
          fmt("100 images, %zu output files identical for workers 1/4/8: %s; "
              "rerun identical: %s",
              first.size(), ok ? "yes" : "no", idempotent ? "yes" : "no")};
}

// 7. Scale smoke run.
Outcome scale(std::size_t count) {
  sftest::TempDir tmp;
  SynthParams params;
  params.min_height = params.max_height = 512;
  params.min_width = params.max_width = 512;
  params.min_shapes = params.max_shapes = 16;
  params.min_quality = 0.88;
  const auto g0 = Clock::now();
  write_synth_corpus(tmp.path(), count, params, 1, 0, false);
  const double gen_secs = seconds_since(g0);

  PipelineConfig cfg;
  cfg.masks_dir = tmp / "masks";
  cfg.out_dir = tmp / "out";
  const auto t0 = Clock::now();
  const ComposeSummary s = run_compose(cfg);
  const double secs = seconds_since(t0);
  const double rate = static_cast<double>(s.labels_written) / secs;
  const unsigned cores = std::thread::hardware_concurrency();
  const bool ok = s.failures.empty() && s.labels_written == count &&
                  s.masks_parsed == 16 * count &&
                  s.manifest.entries.size() == count;
  return {ok, fmt("%zu images 512x512 x 16 masks, %zu failures, %.1f images/s "
                  "on %u core(s) with %zu workers (target 50/s on 4 cores is "
                  "informative; corpus generation %.1f s)",
                  s.labels_written, s.failures.size(), rate, cores,
                  resolve_workers(0), gen_secs)};
}

// 8. Splits from two independent CLI runs.
Outcome split_reproducibility() {
  sftest::TempDir tmp;
  for (int i = 0; i < 257; ++i) {
    const std::string id = (i % 3 ? "urban/" : "indoor/") + std::to_string(i);
    write_label_png(LabelMap(4, 4), tmp / ("labels/" + id + ".png"));
    write_label_png(LabelMap(4, 4), tmp / ("images/" + id + ".png"));
  }
  if (run_cli("manifest --images-dir " + q(tmp / "images") + " --labels-dir " +
              q(tmp / "labels") + " --out " + q(tmp / "all.jsonl")) != 0) {
    return {false, "manifest build failed"};
  }
  bool same = true;
  for (const char* run : {"a", "b"}) {
    if (run_cli("split --manifest " + q(tmp / "all.jsonl") +
                " --fractions 0.7,0.2,0.1 --seed 13 --names train,val,test "
                "--out-dir " + q(tmp / run)) != 0) {
      return {false, "split run failed"};
    }
  }
  std::set<std::string> seen;
  std::size_t dupes = 0, total = 0;
  std::string sizes;
  for (const char* name : {"train", "val", "test"}) {
    const fs::path file = std::string(name) + ".jsonl";
    same = same && sftest::slurp(tmp / "a" / file) == sftest::slurp(tmp / "b" / file);
    const Manifest part = read_manifest(tmp / "a" / file);
    sizes += (sizes.empty() ? "" : "/") + std::to_string(part.entries.size());
    for (const auto& e : part.entries) {
      ++total;
      if (!seen.insert(e.id).second) ++dupes;
      same = same && fs::exists(part.resolve(e.label_path));
    }
  }
  const Manifest all = read_manifest(tmp / "all.jsonl");
  std::set<std::string> ids;
  for (const auto& e : all.entries) ids.insert(e.id);
  const bool covered = seen == ids;
  const double fr[] = {0.7, 0.2, 0.1};
  const auto other_seed = split_manifest(all, fr, 14);
  const auto same_seed = split_manifest(all, fr, 13);
  const bool seed_matters = !(other_seed[0].entries == same_seed[0].entries);
  return {same && dupes == 0 && covered && seed_matters,
          fmt("257 entries -> %s, byte-identical across runs: %s, "
              "overlaps %zu, full coverage: %s, different seed differs: %s",
              sizes.c_str(), same ? "yes" : "no", dupes,
              covered ? "yes" : "no", seed_matters ? "yes" : "no")};
}

}  // namespace

int main(int argc, char** argv) {
  std::size_t scale_images = 10'000;
  for (int i = 1; i + 1 < argc; ++i) {
    if (std::string(argv[i]) == "--scale-images") {
      scale_images = std::stoul(argv[i + 1]);
    }
  }

  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"1 evaluation surface (mIoU + F_beta^w from label directories)",
       evaluation_surface},
      {"2 RLE codec conformance", rle_conformance},
      {"3 mIoU oracle equivalence", miou_oracle},
      {"4 F_beta^w and EDT oracle equivalence", wfb_oracle},
      {"5 composition semantics", composition_oracle},
      {"6 determinism and idempotence", determinism},
      {"7 scale smoke", [&] { return scale(scale_images); }},
      {"8 split reproducibility", split_reproducibility},
  };

  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::printf("[%s] %s: %s\n", o.pass ? "PASS" : "FAIL", name,
                o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n",
              static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}

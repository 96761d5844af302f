#include <cmath>
#include <numeric>

#include "doctest.h"
#include "satirforge/metrics.hpp"
#include "satirforge/oracle.hpp"
#include "support.hpp"

using namespace satirforge;

namespace {

RealGrid soft(const BitMask& b) {
  RealGrid g(b.height(), b.width());
  for (std::size_t i = 0; i < b.size(); ++i) g[i] = b[i];
  return g;
}

// The three fixed cases of tests/fixtures/wfb_reference.py.
std::pair<RealGrid, BitMask> case_soft() {
  BitMask gt(5, 6);
  RealGrid pred(5, 6);
  for (std::uint32_t r = 0; r < 5; ++r) {
    for (std::uint32_t c = 0; c < 6; ++c) {
      gt.set(r, c, r >= 1 && r < 4 && c >= 2 && c < 5);
      pred.at(r, c) = std::min(((r * 7 + c * 3) % 11) / 10.0, 1.0);
    }
  }
  return {pred, gt};
}

std::pair<RealGrid, BitMask> case_shifted() {
  BitMask gt(12, 9);
  RealGrid pred(12, 9);
  for (std::uint32_t r = 0; r < 12; ++r) {
    for (std::uint32_t c = 0; c < 9; ++c) {
      gt.set(r, c, std::abs(int(r) - int(c)) <= 1);
    }
  }
  for (std::uint32_t r = 0; r < 12; ++r) {
    for (std::uint32_t c = 1; c < 9; ++c) pred.at(r, c) = gt.at(r, c - 1);
  }
  return {pred, gt};
}

std::pair<RealGrid, BitMask> case_blob() {
  BitMask gt(20, 16);
  RealGrid pred(20, 16);
  for (std::uint32_t r = 0; r < 20; ++r) {
    for (std::uint32_t c = 0; c < 16; ++c) {
      const int dr = int(r) - 9, dc = int(c) - 7;
      gt.set(r, c, dr * dr + dc * dc <= 25);
      if (r >= 4 && r < 15 && c >= 3 && c < 13) pred.at(r, c) = 0.75;
    }
  }
  pred.at(0, 0) = 1.0;
  return {pred, gt};
}

WfbParams with_beta(double beta) {
  WfbParams p;
  p.beta = beta;
  return p;
}

}  // namespace

TEST_CASE("confusion matrix and the 7/12 example") {
  const LabelMap pred = sftest::labels({{0, 1}, {1, 1}});
  const LabelMap gt = sftest::labels({{0, 1}, {0, 1}});
  const ConfusionMatrix cm = accumulate_confusion(pred, gt, 2);
  CHECK(cm.at(0, 0) == 1);
  CHECK(cm.at(0, 1) == 1);
  CHECK(cm.at(1, 1) == 2);
  CHECK(cm.total() == 4);
  const MiouResult r = miou(cm, MiouPolicy::all_classes);
  CHECK(r.miou == doctest::Approx(7.0 / 12.0).epsilon(1e-15));
  CHECK(*r.per_class[0] == doctest::Approx(0.5));
  CHECK(*r.per_class[1] == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("ignore pixels and absent classes") {
  const LabelMap pred = sftest::labels({{0, 2}, {1, 0}});
  const LabelMap gt = sftest::labels({{0, 255}, {1, 255}});
  const ConfusionMatrix cm = accumulate_confusion(pred, gt, 4);
  CHECK(cm.total() == 2);
  const auto all = miou(cm, MiouPolicy::all_classes);
  const auto present = miou(cm, MiouPolicy::present_classes);
  CHECK_FALSE(all.per_class[2].has_value());
  CHECK_FALSE(all.per_class[3].has_value());
  CHECK(all.miou == doctest::Approx(0.5));
  CHECK(present.miou == doctest::Approx(1.0));
  CHECK(parse_miou_policy("present_classes") == MiouPolicy::present_classes);
}

TEST_CASE("metric errors") {
  const LabelMap a = sftest::labels({{0, 1}});
  CHECK_THROWS_AS(accumulate_confusion(a, sftest::labels({{0}, {1}}), 2),
                  DimensionMismatch);
  CHECK_THROWS_AS(accumulate_confusion(a, sftest::labels({{0, 2}}), 2),
                  LabelOutOfRange);
  CHECK_THROWS_AS(accumulate_confusion(sftest::labels({{0, 5}}), a, 2),
                  LabelOutOfRange);
  CHECK_THROWS_AS(miou(ConfusionMatrix(3), MiouPolicy::all_classes),
                  EmptyEvaluation);
  CHECK_THROWS_AS(euclidean_distance_transform(BitMask(3, 3)), EmptyForeground);
}

TEST_CASE("property: mIoU equals the pixel-set oracle") {
  SplitRng rng(5);
  for (int t = 0; t < 200; ++t) {
    const std::size_t classes = rng.uniform(2, 8);
    const LabelMap gt = sftest::random_labels(rng, 16, 16, classes, 0.1);
    const LabelMap pred = sftest::random_labels(rng, 16, 16, classes);
    for (auto policy : {MiouPolicy::all_classes, MiouPolicy::present_classes}) {
      const double fast = miou(accumulate_confusion(pred, gt, classes), policy).miou;
      CHECK(fast == naive_miou(pred, gt, classes, kIgnoreLabel, policy));
      CHECK(fast >= 0.0);
      CHECK(fast <= 1.0);
    }
    CHECK(miou(accumulate_confusion(gt, gt, classes), MiouPolicy::present_classes)
              .miou == 1.0);
  }
}

TEST_CASE("property: mIoU is invariant under relabelling classes") {
  SplitRng rng(6);
  for (int t = 0; t < 100; ++t) {
    const std::size_t classes = rng.uniform(2, 9);
    const LabelMap gt = sftest::random_labels(rng, 12, 10, classes, 0.1);
    const LabelMap pred = sftest::random_labels(rng, 12, 10, classes);
    std::vector<std::uint8_t> perm(classes);
    std::iota(perm.begin(), perm.end(), std::uint8_t{0});
    for (std::size_t i = classes - 1; i > 0; --i) {
      std::swap(perm[i], perm[rng.uniform(0, i)]);
    }
    LabelMap gt2 = gt, pred2 = pred;
    for (auto& v : gt2.values()) v = v == kIgnoreLabel ? v : perm[v];
    for (auto& v : pred2.values()) v = perm[v];
    const auto cm = accumulate_confusion(pred, gt, classes);
    const auto cm2 = accumulate_confusion(pred2, gt2, classes);
    CHECK(miou(cm, MiouPolicy::all_classes).miou ==
          doctest::Approx(miou(cm2, MiouPolicy::all_classes).miou).epsilon(1e-14));
    std::size_t scored = 0;
    for (auto v : gt.values()) scored += v != kIgnoreLabel;
    CHECK(cm.total() == scored);
  }
}

TEST_CASE("property: merged confusion equals one pass over both images") {
  SplitRng rng(8);
  for (int t = 0; t < 50; ++t) {
    const LabelMap g1 = sftest::random_labels(rng, 9, 7, 4, 0.2);
    const LabelMap p1 = sftest::random_labels(rng, 9, 7, 4);
    const LabelMap g2 = sftest::random_labels(rng, 5, 3, 4, 0.2);
    const LabelMap p2 = sftest::random_labels(rng, 5, 3, 4);
    ConfusionMatrix a = accumulate_confusion(p1, g1, 4);
    a.merge(accumulate_confusion(p2, g2, 4));
    ConfusionMatrix b(4);
    accumulate_into(b, p1, g1);
    accumulate_into(b, p2, g2);
    CHECK(a == b);
  }
}

TEST_CASE("EDT single pixel closed form") {
  BitMask fg(7, 5);
  fg.set(2, 3);
  const auto dt = euclidean_distance_transform(fg);
  for (std::uint32_t r = 0; r < 7; ++r) {
    for (std::uint32_t c = 0; c < 5; ++c) {
      CHECK(dt.dist.at(r, c) == std::hypot(double(r) - 2, double(c) - 3));
      CHECK(dt.nearest.at(r, c) == 3 * 7 + 2);
    }
  }
  const auto full = euclidean_distance_transform(BitMask(4, 4, true));
  for (double d : full.dist.values()) CHECK(d == 0.0);
}

TEST_CASE("EDT ties go to the smallest column-major index") {
  // (1,1) is equidistant from (0,1), (1,0), (1,2) and (2,1).
  const BitMask fg = sftest::bits({{0, 1, 0}, {1, 0, 1}, {0, 1, 0}});
  const auto dt = euclidean_distance_transform(fg);
  CHECK(dt.nearest.at(1, 1) == 1);  // (row 1, col 0)
  CHECK(dt.nearest.at(0, 0) == 1);  // (1,0) beats (0,1) = index 3
}

TEST_CASE("property: EDT equals the all-pairs oracle") {
  SplitRng rng(21);
  for (int t = 0; t < 150; ++t) {
    const auto h = static_cast<std::uint32_t>(rng.uniform(1, 24));
    const auto w = static_cast<std::uint32_t>(rng.uniform(1, 24));
    BitMask fg = sftest::random_bits(rng, h, w, rng.unit() * 0.3);
    fg.set(static_cast<std::uint32_t>(rng.uniform(0, h - 1)),
           static_cast<std::uint32_t>(rng.uniform(0, w - 1)));
    const auto dt = euclidean_distance_transform(fg);
    CHECK(dt.dist == naive_edt(fg));
    CHECK(dt.nearest == naive_nearest(fg));
  }
}

TEST_CASE("Gaussian taps") {
  const auto taps = gaussian_taps({});
  REQUIRE(taps.size() == 7);
  double sum = 0.0;
  for (double t : taps) sum += t;
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(taps[0] == taps[6]);
  CHECK(taps[3] > taps[2]);
  WfbParams bad;
  bad.kernel_size = 4;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("weighted F-measure: frozen reference values") {
  struct Expect {
    std::pair<RealGrid, BitMask> data;
    double b1, b05, b2;
  };
  const Expect cases[] = {
      {case_soft(), 0.39438659764902328, 0.32887734916095773, 0.49248492299572644},
      {case_shifted(), 0.74491396839624857, 0.72849159755491089, 0.76209383374495365},
      {case_blob(), 0.71658660915457595, 0.69929371266471252, 0.73475646726066246},
  };
  for (const auto& c : cases) {
    const auto& [pred, gt] = c.data;
    CHECK(std::abs(weighted_fbeta_binary(pred, gt, with_beta(1.0)) - c.b1) <= 1e-12);
    CHECK(std::abs(weighted_fbeta_binary(pred, gt, with_beta(0.5)) - c.b05) <= 1e-12);
    CHECK(std::abs(weighted_fbeta_binary(pred, gt, with_beta(2.0)) - c.b2) <= 1e-12);
  }
}

TEST_CASE("weighted F-measure: perfect, miss and empty ground truth") {
  SplitRng rng(3);
  for (int t = 0; t < 30; ++t) {
    BitMask gt = sftest::random_bits(rng, 12, 10, 0.3);
    gt.set(0, 0);
    CHECK(std::abs(weighted_fbeta_binary(soft(gt), gt) - 1.0) <= 1e-12);
    CHECK(weighted_fbeta_binary(RealGrid(12, 10), gt) == 0.0);
  }
  const BitMask empty(4, 4);
  CHECK(weighted_fbeta_binary(RealGrid(4, 4), empty) == 1.0);
  RealGrid stray(4, 4);
  stray.at(2, 2) = 0.1;
  CHECK(weighted_fbeta_binary(stray, empty) == 0.0);
  CHECK_THROWS_AS(weighted_fbeta_binary(RealGrid(4, 5), empty), DimensionMismatch);
}

TEST_CASE("property: weighted F-measure equals the windowed oracle") {
  SplitRng rng(99);
  for (int t = 0; t < 60; ++t) {
    const auto h = static_cast<std::uint32_t>(rng.uniform(1, 20));
    const auto w = static_cast<std::uint32_t>(rng.uniform(1, 20));
    const BitMask gt = sftest::random_bits(rng, h, w, rng.unit());
    RealGrid pred(h, w);
    for (auto& v : pred.values()) v = rng.chance(0.3) ? 0.0 : rng.unit();
    const WfbParams p = with_beta(0.5 + 1.5 * rng.unit());
    const double fast = weighted_fbeta_binary(pred, gt, p);
    CHECK(std::abs(fast - naive_wfb(pred, gt, p)) <= 1e-9);
    CHECK(fast >= 0.0);
    CHECK(fast <= 1.0);
  }
}

TEST_CASE("multiclass F-measure scores present classes only") {
  const LabelMap gt = sftest::labels({{0, 0, 1, 1}, {0, 0, 1, 1}, {255, 255, 2, 2}});
  const WfbResult r = weighted_fbeta_multiclass(gt, gt, 4);
  CHECK(r.per_class[0].has_value());
  CHECK(r.per_class[1].has_value());
  CHECK(r.per_class[2].has_value());
  CHECK_FALSE(r.per_class[3].has_value());
  CHECK(std::abs(r.macro - 1.0) <= 1e-12);

  // Ignored pixels do not count against the prediction.
  LabelMap pred = gt;
  pred.at(2, 0) = 1;
  pred.at(2, 1) = 3;
  CHECK(std::abs(weighted_fbeta_multiclass(pred, gt, 4).macro - 1.0) <= 1e-12);

  const LabelMap all_ignored = sftest::labels({{255, 255}});
  CHECK_THROWS_AS(weighted_fbeta_multiclass(sftest::labels({{0, 0}}), all_ignored, 2),
                  EmptyEvaluation);
}

#include "satirforge/metrics.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

#include "satirforge/error.hpp"

namespace satirforge {

ConfusionMatrix& ConfusionMatrix::merge(const ConfusionMatrix& other) {
  if (other.num_classes_ != num_classes_) {
    throw DimensionMismatch("cannot merge confusion matrices of " +
                            std::to_string(num_classes_) + " and " +
                            std::to_string(other.num_classes_) + " classes");
  }
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
  return *this;
}

std::uint64_t ConfusionMatrix::total() const {
  return std::accumulate(counts_.begin(), counts_.end(), std::uint64_t{0});
}

std::uint64_t ConfusionMatrix::row_sum(std::size_t gt) const {
  std::uint64_t s = 0;
  for (std::size_t p = 0; p < num_classes_; ++p) s += at(gt, p);
  return s;
}

std::uint64_t ConfusionMatrix::col_sum(std::size_t pred) const {
  std::uint64_t s = 0;
  for (std::size_t g = 0; g < num_classes_; ++g) s += at(g, pred);
  return s;
}

void accumulate_into(ConfusionMatrix& cm, const LabelMap& pred,
                     const LabelMap& gt, std::uint8_t ignore_value) {
  if (!pred.same_shape(gt)) {
    throw DimensionMismatch(
        "prediction is " + std::to_string(pred.height()) + "x" +
        std::to_string(pred.width()) + ", ground truth is " +
        std::to_string(gt.height()) + "x" + std::to_string(gt.width()));
  }
  const std::size_t c = cm.num_classes();
  // Dense local tally, folded into the matrix once.
  std::vector<std::uint64_t> local(256 * 256, 0);
  for (std::size_t i = 0; i < gt.size(); ++i) {
    const std::uint8_t g = gt[i];
    if (g == ignore_value) continue;
    ++local[static_cast<std::size_t>(g) * 256 + pred[i]];
  }
  for (std::size_t g = 0; g < 256; ++g) {
    for (std::size_t p = 0; p < 256; ++p) {
      const std::uint64_t n = local[g * 256 + p];
      if (n == 0) continue;
      if (g >= c || p >= c) {
        throw LabelOutOfRange(
            "label " + std::to_string(g >= c ? g : p) + " in " +
            (g >= c ? "ground truth" : "prediction") + " is not below " +
            std::to_string(c) + " classes");
      }
      cm.add(g, p, n);
    }
  }
}

ConfusionMatrix accumulate_confusion(const LabelMap& pred, const LabelMap& gt,
                                     std::size_t num_classes,
                                     std::uint8_t ignore_value) {
  if (num_classes < 1 || num_classes > 256) {
    throw std::invalid_argument("num_classes must lie in [1, 256]");
  }
  ConfusionMatrix cm(num_classes);
  accumulate_into(cm, pred, gt, ignore_value);
  return cm;
}

std::string_view to_string(MiouPolicy policy) {
  switch (policy) {
    case MiouPolicy::present_classes:
      return "present_classes";
    case MiouPolicy::all_classes:
      return "all_classes";
  }
  return "unknown";
}

MiouPolicy parse_miou_policy(std::string_view name) {
  if (name == "present_classes") return MiouPolicy::present_classes;
  if (name == "all_classes") return MiouPolicy::all_classes;
  throw std::invalid_argument("unknown mIoU policy: " + std::string(name));
}

MiouResult miou(const ConfusionMatrix& cm, MiouPolicy policy) {
  if (cm.total() == 0) {
    throw EmptyEvaluation("no scorable pixels were accumulated");
  }
  const std::size_t c = cm.num_classes();
  MiouResult result;
  result.per_class.resize(c);
  double sum = 0.0;
  std::size_t present = 0;
  for (std::size_t k = 0; k < c; ++k) {
    const std::uint64_t inter = cm.at(k, k);
    const std::uint64_t uni = cm.row_sum(k) + cm.col_sum(k) - inter;
    if (uni == 0) continue;
    const double iou =
        static_cast<double>(inter) / static_cast<double>(uni);
    result.per_class[k] = iou;
    sum += iou;
    ++present;
  }
  const std::size_t denom = policy == MiouPolicy::all_classes ? c : present;
  result.miou = sum / static_cast<double>(denom);
  return result;
}

namespace {

// Rational a/b with b > 0; magnitudes stay far below 2^63 when cross
// multiplied for images up to 65535 px per side.
struct Ratio {
  std::int64_t num;
  std::int64_t den;
};

bool less_equal(const Ratio& a, const Ratio& b) {
  return a.num * b.den <= b.num * a.den;
}

}  // namespace

DistanceTransform euclidean_distance_transform(const BitMask& fg) {
  const std::uint32_t h = fg.height();
  const std::uint32_t w = fg.width();
  constexpr std::int64_t kNone = -1;

  // Pass 1: per column, nearest foreground row (ties to the upper row).
  Grid<std::int64_t> near_row(h, w, kNone);
  std::vector<std::uint32_t> fg_cols;
  for (std::uint32_t c = 0; c < w; ++c) {
    std::int64_t last = kNone;
    for (std::uint32_t r = 0; r < h; ++r) {
      if (fg.test(r, c)) last = r;
      near_row.at(r, c) = last;
    }
    if (last == kNone) continue;
    fg_cols.push_back(c);
    std::int64_t next = kNone;
    for (std::uint32_t r = h; r-- > 0;) {
      if (fg.test(r, c)) next = r;
      const std::int64_t up = near_row.at(r, c);
      if (next != kNone &&
          (up == kNone || next - static_cast<std::int64_t>(r) <
                              static_cast<std::int64_t>(r) - up)) {
        near_row.at(r, c) = next;
      }
    }
  }
  if (fg_cols.empty()) {
    throw EmptyForeground("distance transform needs a foreground pixel");
  }

  // Pass 2: per row, lower envelope of parabolas (x - q)^2 + f(q) over the
  // columns q that hold foreground. Intersections are exact rationals so
  // that ties resolve to the leftmost column.
  DistanceTransform out{RealGrid(h, w), Grid<std::uint64_t>(h, w)};
  const std::size_t n = fg_cols.size();
  std::vector<std::int64_t> f(n);
  std::vector<std::size_t> hull(n);
  std::vector<Ratio> z(n);
  for (std::uint32_t r = 0; r < h; ++r) {
    for (std::size_t i = 0; i < n; ++i) {
      const std::int64_t d = near_row.at(r, fg_cols[i]) - r;
      f[i] = d * d;
    }
    auto offset = [&](std::size_t i) {
      const auto q = static_cast<std::int64_t>(fg_cols[i]);
      return f[i] + q * q;
    };

    std::size_t top = 0;
    hull[0] = 0;
    for (std::size_t i = 1; i < n; ++i) {
      const auto q = static_cast<std::int64_t>(fg_cols[i]);
      Ratio s{};
      while (true) {
        const auto v = static_cast<std::int64_t>(fg_cols[hull[top]]);
        s = {offset(i) - offset(hull[top]), 2 * (q - v)};
        if (top > 0 && less_equal(s, z[top])) {
          --top;
        } else {
          break;
        }
      }
      hull[++top] = i;
      z[top] = s;
    }

    std::size_t k = 0;
    for (std::uint32_t x = 0; x < w; ++x) {
      const Ratio at_x{static_cast<std::int64_t>(x), 1};
      // Advance while the next parabola's region starts strictly left of x.
      while (k < top && !less_equal(at_x, z[k + 1])) ++k;
      const std::size_t best = hull[k];
      const auto col = static_cast<std::int64_t>(fg_cols[best]);
      const std::int64_t dx = static_cast<std::int64_t>(x) - col;
      const std::int64_t d2 = dx * dx + f[best];
      out.dist.at(r, x) = std::sqrt(static_cast<double>(d2));
      out.nearest.at(r, x) =
          static_cast<std::uint64_t>(col) * h +
          static_cast<std::uint64_t>(near_row.at(r, fg_cols[best]));
    }
  }
  return out;
}

void WfbParams::validate() const {
  if (!(beta > 0.0)) throw std::invalid_argument("beta must be positive");
  if (kernel_size < 1 || kernel_size % 2 == 0) {
    throw std::invalid_argument("kernel_size must be a positive odd count");
  }
  if (!(kernel_sigma > 0.0)) {
    throw std::invalid_argument("kernel_sigma must be positive");
  }
  if (!(decay < 0.0)) throw std::invalid_argument("decay must be negative");
}

std::vector<double> gaussian_taps(const WfbParams& params) {
  const int radius = params.kernel_size / 2;
  std::vector<double> taps(static_cast<std::size_t>(params.kernel_size));
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double v = std::exp(-static_cast<double>(i * i) /
                              (2.0 * params.kernel_sigma * params.kernel_sigma));
    taps[static_cast<std::size_t>(i + radius)] = v;
    sum += v;
  }
  for (auto& t : taps) t /= sum;
  return taps;
}

namespace {

// Separable Gaussian blur; taps falling outside the image are dropped and
// the remaining weights renormalized. The clipped 2-D window is a rectangle,
// so per-axis renormalization equals renormalizing the 2-D kernel.
RealGrid blur_truncated(const RealGrid& src, const std::vector<double>& taps) {
  const std::uint32_t h = src.height();
  const std::uint32_t w = src.width();
  const int radius = static_cast<int>(taps.size() / 2);
  RealGrid tmp(h, w);
  for (std::uint32_t r = 0; r < h; ++r) {
    for (std::uint32_t c = 0; c < w; ++c) {
      double acc = 0.0;
      double norm = 0.0;
      for (int j = -radius; j <= radius; ++j) {
        const std::int64_t cc = static_cast<std::int64_t>(c) + j;
        if (cc < 0 || cc >= w) continue;
        const double t = taps[static_cast<std::size_t>(j + radius)];
        acc += t * src.at(r, static_cast<std::uint32_t>(cc));
        norm += t;
      }
      tmp.at(r, c) = acc / norm;
    }
  }
  RealGrid out(h, w);
  for (std::uint32_t r = 0; r < h; ++r) {
    for (std::uint32_t c = 0; c < w; ++c) {
      double acc = 0.0;
      double norm = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        const std::int64_t rr = static_cast<std::int64_t>(r) + i;
        if (rr < 0 || rr >= h) continue;
        const double t = taps[static_cast<std::size_t>(i + radius)];
        acc += t * tmp.at(static_cast<std::uint32_t>(rr), c);
        norm += t;
      }
      out.at(r, c) = acc / norm;
    }
  }
  return out;
}

}  // namespace

double weighted_fbeta_binary(const RealGrid& pred, const BitMask& gt,
                             const WfbParams& params) {
  params.validate();
  if (!pred.same_shape(gt)) {
    throw DimensionMismatch("prediction and ground truth differ in size");
  }
  const std::uint32_t h = gt.height();
  const std::uint32_t w = gt.width();
  const std::uint64_t fg_count = gt.count();
  if (fg_count == 0) {
    const bool all_zero = std::all_of(pred.values().begin(),
                                      pred.values().end(),
                                      [](double v) { return v == 0.0; });
    return all_zero ? 1.0 : 0.0;
  }

  RealGrid error(h, w);
  for (std::size_t i = 0; i < error.size(); ++i) {
    error[i] = std::abs(pred[i] - static_cast<double>(gt[i]));
  }

  const DistanceTransform edt = euclidean_distance_transform(gt);
  // Background pixels borrow the error of their nearest foreground pixel so
  // the blur does not smear background errors into the object boundary.
  RealGrid borrowed = error;
  for (std::uint32_t r = 0; r < h; ++r) {
    for (std::uint32_t c = 0; c < w; ++c) {
      if (gt.test(r, c)) continue;
      const std::uint64_t idx = edt.nearest.at(r, c);
      borrowed.at(r, c) = error.at(static_cast<std::uint32_t>(idx % h),
                                   static_cast<std::uint32_t>(idx / h));
    }
  }
  const RealGrid dependent = blur_truncated(borrowed, gaussian_taps(params));

  double fg_error = 0.0;
  double bg_error = 0.0;
  for (std::uint32_t r = 0; r < h; ++r) {
    for (std::uint32_t c = 0; c < w; ++c) {
      const double e = error.at(r, c);
      if (gt.test(r, c)) {
        fg_error += std::min(e, dependent.at(r, c));
      } else {
        const double importance =
            2.0 - std::exp(params.decay * edt.dist.at(r, c));
        bg_error += e * importance;
      }
    }
  }

  const double g = static_cast<double>(fg_count);
  const double tp = g - fg_error;
  const double fp = bg_error;
  const double recall = 1.0 - fg_error / g;
  const double precision = tp + fp > 0.0 ? tp / (tp + fp) : 0.0;
  const double b2 = params.beta * params.beta;
  const double denom = b2 * precision + recall;
  if (denom <= 0.0) return 0.0;
  return std::clamp((1.0 + b2) * precision * recall / denom, 0.0, 1.0);
}

WfbResult weighted_fbeta_multiclass(const LabelMap& pred, const LabelMap& gt,
                                    std::size_t num_classes,
                                    std::uint8_t ignore_value,
                                    const WfbParams& params) {
  if (!pred.same_shape(gt)) {
    throw DimensionMismatch("prediction and ground truth differ in size");
  }
  if (num_classes < 1 || num_classes > 256) {
    throw std::invalid_argument("num_classes must lie in [1, 256]");
  }
  std::vector<bool> present(num_classes, false);
  for (std::size_t i = 0; i < gt.size(); ++i) {
    const std::uint8_t g = gt[i];
    if (g == ignore_value) continue;
    if (g >= num_classes) {
      throw LabelOutOfRange("ground-truth label " + std::to_string(g) +
                            " is not below " + std::to_string(num_classes));
    }
    if (pred[i] >= num_classes) {
      throw LabelOutOfRange("predicted label " + std::to_string(pred[i]) +
                            " is not below " + std::to_string(num_classes));
    }
    present[g] = true;
  }

  WfbResult result;
  result.per_class.resize(num_classes);
  double sum = 0.0;
  std::size_t n = 0;
  RealGrid soft(gt.height(), gt.width());
  BitMask truth(gt.height(), gt.width());
  for (std::size_t k = 0; k < num_classes; ++k) {
    if (!present[k]) continue;
    for (std::size_t i = 0; i < gt.size(); ++i) {
      const bool scored = gt[i] != ignore_value;
      soft[i] = scored && pred[i] == k ? 1.0 : 0.0;
      truth[i] = scored && gt[i] == k ? 1 : 0;
    }
    const double score = weighted_fbeta_binary(soft, truth, params);
    result.per_class[k] = score;
    sum += score;
    ++n;
  }
  if (n == 0) throw EmptyEvaluation("ground truth holds no scorable pixel");
  result.macro = sum / static_cast<double>(n);
  return result;
}

}  // namespace satirforge

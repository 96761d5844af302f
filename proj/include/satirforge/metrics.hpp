#pragma once

// Segmentation scores: confusion-matrix mIoU and the weighted F-measure
// F_beta^w of Margolin et al. together with the exact Euclidean distance
// transform it needs.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "satirforge/grid.hpp"
#include "satirforge/label_map.hpp"

namespace satirforge {

/// C x C pixel tallies, row = ground-truth class, column = predicted class.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t num_classes = 0)
      : num_classes_(num_classes), counts_(num_classes * num_classes, 0) {}

  std::size_t num_classes() const { return num_classes_; }
  std::uint64_t at(std::size_t gt, std::size_t pred) const {
    return counts_[gt * num_classes_ + pred];
  }
  void add(std::size_t gt, std::size_t pred, std::uint64_t n = 1) {
    counts_[gt * num_classes_ + pred] += n;
  }
  /// Entrywise sum; throws DimensionMismatch on differing class counts.
  ConfusionMatrix& merge(const ConfusionMatrix& other);

  std::uint64_t total() const;
  std::uint64_t row_sum(std::size_t gt) const;
  std::uint64_t col_sum(std::size_t pred) const;

  friend bool operator==(const ConfusionMatrix&,
                         const ConfusionMatrix&) = default;

 private:
  std::size_t num_classes_;
  std::vector<std::uint64_t> counts_;
};

/// Tallies every pixel whose ground truth is not `ignore_value`. Labels must
/// be < num_classes (ground truth may also hold ignore_value).
ConfusionMatrix accumulate_confusion(const LabelMap& pred, const LabelMap& gt,
                                     std::size_t num_classes,
                                     std::uint8_t ignore_value = kIgnoreLabel);

/// Adds into an existing matrix; same checks as accumulate_confusion.
void accumulate_into(ConfusionMatrix& cm, const LabelMap& pred,
                     const LabelMap& gt,
                     std::uint8_t ignore_value = kIgnoreLabel);

enum class MiouPolicy { present_classes, all_classes };

std::string_view to_string(MiouPolicy policy);
MiouPolicy parse_miou_policy(std::string_view name);

struct MiouResult {
  double miou = 0.0;
  /// Absent where the class has neither ground truth nor prediction pixels.
  std::vector<std::optional<double>> per_class;
};

/// present_classes averages over classes with a nonzero IoU denominator;
/// all_classes divides the same sum by C, i.e. absent classes score 0.
/// Throws EmptyEvaluation when the matrix is empty.
MiouResult miou(const ConfusionMatrix& cm, MiouPolicy policy);

struct DistanceTransform {
  /// Euclidean distance to the nearest foreground pixel.
  RealGrid dist;
  /// Column-major index (col * height + row) of that pixel; ties go to the
  /// smallest index.
  Grid<std::uint64_t> nearest;
};

/// Exact EDT (separable lower-envelope scheme over integer squared
/// distances). Throws EmptyForeground when `fg` has no set pixel.
DistanceTransform euclidean_distance_transform(const BitMask& fg);

struct WfbParams {
  double beta = 1.0;
  int kernel_size = 7;
  double kernel_sigma = 5.0;
  double decay = std::log(0.5) / 5.0;

  /// Throws std::invalid_argument when an invariant does not hold.
  void validate() const;
};

/// Normalized 1-D Gaussian taps; the 2-D dependency kernel is their outer
/// product.
std::vector<double> gaussian_taps(const WfbParams& params);

/// Weighted F-measure of a soft foreground map in [0, 1] against a binary
/// ground truth. An empty ground truth scores 1 for an all-zero prediction
/// and 0 otherwise.
double weighted_fbeta_binary(const RealGrid& pred, const BitMask& gt,
                             const WfbParams& params = {});

struct WfbResult {
  double macro = 0.0;
  /// Absent for classes that do not occur in the ground truth.
  std::vector<std::optional<double>> per_class;
};

/// One-vs-rest F_beta^w for every class present in `gt`, macro-averaged.
/// Ignored pixels are zero in both binarized maps. Throws EmptyEvaluation
/// when `gt` holds no scorable pixel.
WfbResult weighted_fbeta_multiclass(const LabelMap& pred, const LabelMap& gt,
                                    std::size_t num_classes,
                                    std::uint8_t ignore_value = kIgnoreLabel,
                                    const WfbParams& params = {});

}  // namespace satirforge

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "satirforge/metrics.hpp"

namespace satirforge {

struct EvalConfig {
  std::size_t num_classes = 2;
  std::uint8_t ignore_value = kIgnoreLabel;
  MiouPolicy miou_policy = MiouPolicy::all_classes;
  WfbParams wfb;
  std::size_t workers = 0;
};

struct EvalReport {
  std::size_t num_classes = 0;
  std::uint8_t ignore_value = kIgnoreLabel;
  MiouPolicy miou_policy = MiouPolicy::all_classes;
  WfbParams wfb_params;

  std::vector<std::optional<double>> per_class_iou;
  double miou = 0.0;
  /// Mean of per-image mIoU under the same policy (alternative aggregation).
  double miou_image_mean = 0.0;
  std::vector<std::optional<double>> per_class_wfb;
  double macro_wfb = 0.0;
  double pixel_accuracy = 0.0;
  std::size_t images_evaluated = 0;

  /// Stems present in only one tree.
  std::vector<std::string> missing_pairs;
  /// Pairs that could not be scored (size mismatch, bad labels, unreadable).
  std::vector<std::string> failures;

  nlohmann::json to_json() const;
  std::string to_text() const;
};

/// Scores every `<stem>.png` of `gt_dir` against `<stem>.png` of `pred_dir`.
/// mIoU comes from one dataset-global confusion matrix; F_beta^w is computed
/// one-vs-rest per image for the classes present in that image's ground
/// truth, averaged over images per class, then macro-averaged over classes.
/// Unpaired stems and unscorable pairs are listed, not fatal. Throws IoError
/// for unreadable directories and EmptyEvaluation when nothing was scored.
EvalReport evaluate(const std::filesystem::path& pred_dir,
                    const std::filesystem::path& gt_dir,
                    const EvalConfig& config);

}  // namespace satirforge

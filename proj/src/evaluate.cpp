#include "satirforge/evaluate.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "satirforge/error.hpp"
#include "satirforge/image_io.hpp"
#include "satirforge/manifest.hpp"
#include "satirforge/parallel.hpp"

namespace satirforge {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json optional_list(const std::vector<std::optional<double>>& v) {
  json out = json::array();
  for (const auto& x : v) out.push_back(x ? json(*x) : json());
  return out;
}

struct ImageScore {
  bool ok = false;
  std::string failure;
  ConfusionMatrix cm;
  std::optional<double> miou;
  std::vector<std::optional<double>> wfb;
};

}  // namespace

json EvalReport::to_json() const {
  return {
      {"num_classes", num_classes},
      {"ignore_value", ignore_value},
      {"images_evaluated", images_evaluated},
      {"miou", miou},
      {"per_class_iou", optional_list(per_class_iou)},
      {"miou_image_mean", miou_image_mean},
      {"macro_wfb", macro_wfb},
      {"per_class_wfb", optional_list(per_class_wfb)},
      {"pixel_accuracy", pixel_accuracy},
      {"policies",
       {{"miou_policy", std::string(to_string(miou_policy))},
        {"miou_aggregation", "dataset-global confusion matrix"},
        {"wfb_aggregation",
         "one-vs-rest per image over classes present in ground truth; mean "
         "over images per class; macro mean over classes"},
        {"wfb_empty_ground_truth", "1 if prediction is all zero, else 0"},
        {"ignore_handling",
         "ignored ground-truth pixels are skipped for mIoU and zeroed in both "
         "binary maps for F_beta^w"},
        {"wfb_params",
         {{"beta", wfb_params.beta},
          {"kernel_size", wfb_params.kernel_size},
          {"kernel_sigma", wfb_params.kernel_sigma},
          {"decay", wfb_params.decay}}}}},
      {"missing_pairs", missing_pairs},
      {"failures", failures},
  };
}

std::string EvalReport::to_text() const {
  std::ostringstream out;
  char buf[128];
  std::snprintf(buf, sizeof buf, "images evaluated : %zu\n", images_evaluated);
  out << buf;
  std::snprintf(buf, sizeof buf, "mIoU             : %.4f (%s)\n", miou,
                std::string(to_string(miou_policy)).c_str());
  out << buf;
  std::snprintf(buf, sizeof buf, "F_beta^w (macro) : %.4f\n", macro_wfb);
  out << buf;
  std::snprintf(buf, sizeof buf, "pixel accuracy   : %.4f\n", pixel_accuracy);
  out << buf;
  out << "class      IoU   F_beta^w\n";
  for (std::size_t k = 0; k < num_classes; ++k) {
    if (!per_class_iou[k] && !per_class_wfb[k]) continue;
    auto cell = [](const std::optional<double>& v) {
      char b[16];
      if (v) {
        std::snprintf(b, sizeof b, "%.4f", *v);
      } else {
        std::snprintf(b, sizeof b, "   -  ");
      }
      return std::string(b);
    };
    std::snprintf(buf, sizeof buf, "%5zu  %s     %s\n", k,
                  cell(per_class_iou[k]).c_str(),
                  cell(per_class_wfb[k]).c_str());
    out << buf;
  }
  for (const auto& m : missing_pairs) out << "missing: " << m << '\n';
  for (const auto& f : failures) out << "failed: " << f << '\n';
  return out.str();
}

EvalReport evaluate(const fs::path& pred_dir, const fs::path& gt_dir,
                    const EvalConfig& config) {
  if (config.num_classes < 1 || config.num_classes > 256) {
    throw std::invalid_argument("num_classes must lie in [1, 256]");
  }
  config.wfb.validate();
  const std::vector<std::string> png{".png"};
  const auto gts = scan_stems(gt_dir, png);
  const auto preds = scan_stems(pred_dir, png);

  EvalReport report;
  report.num_classes = config.num_classes;
  report.ignore_value = config.ignore_value;
  report.miou_policy = config.miou_policy;
  report.wfb_params = config.wfb;

  std::vector<std::pair<std::string, std::pair<fs::path, fs::path>>> pairs;
  for (const auto& [stem, gt_path] : gts) {
    auto it = preds.find(stem);
    if (it == preds.end()) {
      report.missing_pairs.push_back(stem + ": no prediction");
    } else {
      pairs.push_back({stem, {it->second, gt_path}});
    }
  }
  for (const auto& [stem, path] : preds) {
    if (!gts.contains(stem)) {
      report.missing_pairs.push_back(stem + ": no ground truth");
    }
  }
  std::sort(report.missing_pairs.begin(), report.missing_pairs.end());

  std::vector<ImageScore> scores(pairs.size());
  parallel_for(pairs.size(), resolve_workers(config.workers), [&](std::size_t i) {
    ImageScore& s = scores[i];
    const auto& [stem, paths] = pairs[i];
    try {
      const LabelMap pred = read_label_png(paths.first);
      const LabelMap gt = read_label_png(paths.second);
      s.cm = accumulate_confusion(pred, gt, config.num_classes,
                                  config.ignore_value);
      if (s.cm.total() > 0) {
        s.miou = miou(s.cm, config.miou_policy).miou;
        s.wfb = weighted_fbeta_multiclass(pred, gt, config.num_classes,
                                          config.ignore_value, config.wfb)
                    .per_class;
      }
      s.ok = true;
    } catch (const Error& e) {
      s.failure = stem + ": " + e.what();
    }
  });

  ConfusionMatrix global(config.num_classes);
  std::vector<double> wfb_sum(config.num_classes, 0.0);
  std::vector<std::size_t> wfb_n(config.num_classes, 0);
  double miou_sum = 0.0;
  std::size_t miou_n = 0;
  for (const auto& s : scores) {
    if (!s.ok) {
      report.failures.push_back(s.failure);
      continue;
    }
    ++report.images_evaluated;
    global.merge(s.cm);
    if (s.miou) {
      miou_sum += *s.miou;
      ++miou_n;
    }
    for (std::size_t k = 0; k < s.wfb.size(); ++k) {
      if (!s.wfb[k]) continue;
      wfb_sum[k] += *s.wfb[k];
      ++wfb_n[k];
    }
  }
  if (global.total() == 0) {
    throw EmptyEvaluation("no scorable pixels in " + gt_dir.string());
  }

  const MiouResult m = miou(global, config.miou_policy);
  report.miou = m.miou;
  report.per_class_iou = m.per_class;
  report.miou_image_mean = miou_n ? miou_sum / static_cast<double>(miou_n) : 0.0;
  std::uint64_t trace = 0;
  for (std::size_t k = 0; k < config.num_classes; ++k) trace += global.at(k, k);
  report.pixel_accuracy =
      static_cast<double>(trace) / static_cast<double>(global.total());

  report.per_class_wfb.resize(config.num_classes);
  double macro = 0.0;
  std::size_t classes = 0;
  for (std::size_t k = 0; k < config.num_classes; ++k) {
    if (wfb_n[k] == 0) continue;
    const double v = wfb_sum[k] / static_cast<double>(wfb_n[k]);
    report.per_class_wfb[k] = v;
    macro += v;
    ++classes;
  }
  report.macro_wfb = classes ? macro / static_cast<double>(classes) : 0.0;
  return report;
}

}  // namespace satirforge

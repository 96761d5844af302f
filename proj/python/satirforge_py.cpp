#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cstring>

#include "satirforge/compose.hpp"
#include "satirforge/error.hpp"
#include "satirforge/evaluate.hpp"
#include "satirforge/image_io.hpp"
#include "satirforge/metrics.hpp"
#include "satirforge/oracle.hpp"
#include "satirforge/pipeline.hpp"
#include "satirforge/rle.hpp"

namespace py = pybind11;
namespace sf = satirforge;

namespace {

using U8Array = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;
using F64Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

template <typename G, typename A>
G to_grid(const A& arr, const char* what) {
  if (arr.ndim() != 2) {
    throw sf::DimensionMismatch(std::string(what) + " must be a 2-D array");
  }
  G g(static_cast<std::uint32_t>(arr.shape(0)),
      static_cast<std::uint32_t>(arr.shape(1)));
  std::memcpy(g.values().data(), arr.data(),
              g.size() * sizeof(typename A::value_type));
  return g;
}

sf::LabelMap to_labels(const U8Array& arr, const char* what,
                       std::uint8_t ignore = sf::kIgnoreLabel) {
  if (arr.ndim() != 2) {
    throw sf::DimensionMismatch(std::string(what) + " must be a 2-D array");
  }
  sf::LabelMap lm(static_cast<std::uint32_t>(arr.shape(0)),
                  static_cast<std::uint32_t>(arr.shape(1)), 0, ignore);
  std::memcpy(lm.values().data(), arr.data(), lm.size());
  return lm;
}

sf::BitMask to_bits(const U8Array& arr, const char* what) {
  sf::BitMask b = to_grid<sf::BitMask>(arr, what);
  for (auto& v : b.values()) v = v ? 1 : 0;
  return b;
}

template <typename T>
py::array_t<T> to_array(const sf::Grid<T>& g) {
  py::array_t<T> out({static_cast<py::ssize_t>(g.height()),
                      static_cast<py::ssize_t>(g.width())});
  std::memcpy(out.mutable_data(), g.values().data(), g.size() * sizeof(T));
  return out;
}

py::object to_python(const nlohmann::json& doc) {
  return py::module_::import("json").attr("loads")(doc.dump());
}

nlohmann::json from_python(const py::object& obj) {
  if (py::isinstance<py::str>(obj)) {
    return nlohmann::json::parse(obj.cast<std::string>());
  }
  return nlohmann::json::parse(
      py::module_::import("json").attr("dumps")(obj).cast<std::string>());
}

py::list optional_list(const std::vector<std::optional<double>>& v) {
  py::list out;
  for (const auto& x : v) {
    if (x) {
      out.append(*x);
    } else {
      out.append(py::none());
    }
  }
  return out;
}

sf::RleMask rle_from_object(const py::object& counts, std::uint32_t h,
                            std::uint32_t w) {
  if (py::isinstance<py::str>(counts) || py::isinstance<py::bytes>(counts)) {
    return sf::decode_counts_string(counts.cast<std::string>(), h, w);
  }
  const auto runs = counts.cast<std::vector<std::int64_t>>();
  return sf::rle_from_counts(runs, h, w);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "satirforge native core";

  static py::exception<sf::Error> base(m, "SatirforgeError", PyExc_ValueError);
  py::register_exception<sf::MalformedCounts>(m, "MalformedCounts", base.ptr());
  py::register_exception<sf::SchemaError>(m, "SchemaError", base.ptr());
  py::register_exception<sf::DimensionMismatch>(m, "DimensionMismatch", base.ptr());
  py::register_exception<sf::LabelOutOfRange>(m, "LabelOutOfRange", base.ptr());
  py::register_exception<sf::TooManyCategories>(m, "TooManyCategories", base.ptr());
  py::register_exception<sf::EmptyForeground>(m, "EmptyForeground", base.ptr());
  py::register_exception<sf::EmptyEvaluation>(m, "EmptyEvaluation", base.ptr());
  py::register_exception<sf::IoError>(m, "IoError", base.ptr());

  m.def(
      "decode_counts",
      [](const std::string& counts, std::uint32_t height, std::uint32_t width) {
        return sf::decode_counts_string(counts, height, width).runs;
      },
      py::arg("counts"), py::arg("height"), py::arg("width"),
      "COCO compressed counts string -> normalized run lengths.");

  m.def(
      "encode_counts",
      [](const std::vector<std::int64_t>& runs, std::uint32_t height,
         std::uint32_t width) {
        return sf::encode_counts_string(sf::rle_from_counts(runs, height, width));
      },
      py::arg("runs"), py::arg("height"), py::arg("width"));

  m.def(
      "counts_to_bitmask",
      [](const py::object& counts, std::uint32_t height, std::uint32_t width) {
        return to_array<std::uint8_t>(
            sf::rle_to_bitmask(rle_from_object(counts, height, width)));
      },
      py::arg("counts"), py::arg("height"), py::arg("width"),
      "Counts string or run list -> (height, width) uint8 mask.");

  m.def(
      "bitmask_to_counts",
      [](const U8Array& mask) {
        return sf::encode_counts_string(
            sf::bitmask_to_rle(to_bits(mask, "mask")));
      },
      py::arg("mask"));

  m.def(
      "compose",
      [](const std::vector<U8Array>& masks, std::uint32_t height,
         std::uint32_t width, std::size_t max_categories,
         std::uint64_t min_mask_area) {
        std::vector<sf::MaskRecord> records;
        for (std::size_t i = 0; i < masks.size(); ++i) {
          sf::MaskRecord r;
          r.mask = sf::bitmask_to_rle(to_bits(masks[i], "mask"));
          r.area = sf::rle_area(r.mask);
          r.source_index = i;
          records.push_back(std::move(r));
        }
        sf::ComposeConfig cfg;
        cfg.max_categories = max_categories;
        cfg.min_mask_area = min_mask_area;
        const auto res = sf::compose_label_map(records, height, width, cfg);
        return py::make_tuple(to_array<std::uint8_t>(res.labels),
                              res.masks_used, res.masks_dropped);
      },
      py::arg("masks"), py::arg("height"), py::arg("width"),
      py::arg("max_categories") = 16, py::arg("min_mask_area") = 0,
      "First-wins composition of masks given in rank order. Returns "
      "(labels, masks_used, masks_dropped).");

  m.def(
      "label_dump",
      [](const py::object& dump, std::uint32_t height, std::uint32_t width,
         double threshold, std::size_t max_masks, const std::string& rank_key,
         const std::vector<std::string>& tie_breakers,
         std::uint64_t min_mask_area) {
        sf::RankPolicy rank;
        rank.key = sf::parse_rank_key(rank_key);
        for (const auto& t : tie_breakers) {
          rank.tie_breakers.push_back(sf::parse_rank_key(t));
        }
        rank.threshold = threshold;
        rank.max_masks = max_masks;
        sf::ComposeConfig cfg;
        cfg.max_categories = max_masks;
        cfg.min_mask_area = min_mask_area;
        const auto res = sf::label_one_image(from_python(dump), height, width,
                                             rank, cfg);
        py::dict info;
        info["masks_parsed"] = res.masks_parsed;
        info["masks_below_threshold"] = res.masks_below_threshold;
        info["masks_dropped"] = res.masks_dropped;
        info["masks_used"] = res.composed.masks_used;
        info["masks_too_small"] = res.composed.masks_too_small;
        return py::make_tuple(to_array<std::uint8_t>(res.composed.labels), info);
      },
      py::arg("dump"), py::arg("height"), py::arg("width"),
      py::arg("threshold") = 0.88, py::arg("max_masks") = 16,
      py::arg("rank_key") = "predicted_quality",
      py::arg("tie_breakers") = std::vector<std::string>{},
      py::arg("min_mask_area") = 0,
      "Parse, filter, rank and compose one mask dump (JSON text or object).");

  m.def(
      "confusion_matrix",
      [](const U8Array& pred, const U8Array& gt, std::size_t num_classes,
         std::uint8_t ignore) {
        const auto cm = sf::accumulate_confusion(
            to_labels(pred, "pred", ignore), to_labels(gt, "gt", ignore),
            num_classes, ignore);
        py::array_t<std::uint64_t> out({static_cast<py::ssize_t>(num_classes),
                                        static_cast<py::ssize_t>(num_classes)});
        auto* dst = out.mutable_data();
        for (std::size_t i = 0; i < num_classes; ++i) {
          for (std::size_t j = 0; j < num_classes; ++j) {
            dst[i * num_classes + j] = cm.at(i, j);
          }
        }
        return out;
      },
      py::arg("pred"), py::arg("gt"), py::arg("num_classes"),
      py::arg("ignore") = sf::kIgnoreLabel,
      "Rows are ground truth, columns prediction.");

  m.def(
      "miou",
      [](const U8Array& pred, const U8Array& gt, std::size_t num_classes,
         std::uint8_t ignore, const std::string& policy) {
        const auto cm = sf::accumulate_confusion(
            to_labels(pred, "pred", ignore), to_labels(gt, "gt", ignore),
            num_classes, ignore);
        const auto r = sf::miou(cm, sf::parse_miou_policy(policy));
        return py::make_tuple(r.miou, optional_list(r.per_class));
      },
      py::arg("pred"), py::arg("gt"), py::arg("num_classes"),
      py::arg("ignore") = sf::kIgnoreLabel, py::arg("policy") = "all_classes");

  m.def(
      "naive_miou",
      [](const U8Array& pred, const U8Array& gt, std::size_t num_classes,
         std::uint8_t ignore, const std::string& policy) {
        return sf::naive_miou(to_labels(pred, "pred", ignore),
                              to_labels(gt, "gt", ignore), num_classes, ignore,
                              sf::parse_miou_policy(policy));
      },
      py::arg("pred"), py::arg("gt"), py::arg("num_classes"),
      py::arg("ignore") = sf::kIgnoreLabel, py::arg("policy") = "all_classes");

  m.def(
      "distance_transform",
      [](const U8Array& fg) {
        const auto dt = sf::euclidean_distance_transform(to_bits(fg, "fg"));
        return py::make_tuple(to_array<double>(dt.dist),
                              to_array<std::uint64_t>(dt.nearest));
      },
      py::arg("foreground"),
      "Exact EDT. Returns (distance, nearest column-major index).");

  m.def(
      "weighted_fbeta",
      [](const F64Array& pred, const U8Array& gt, double beta) {
        sf::WfbParams p;
        p.beta = beta;
        return sf::weighted_fbeta_binary(to_grid<sf::RealGrid>(pred, "pred"),
                                         to_bits(gt, "gt"), p);
      },
      py::arg("pred"), py::arg("gt"), py::arg("beta") = 1.0);

  m.def(
      "weighted_fbeta_multiclass",
      [](const U8Array& pred, const U8Array& gt, std::size_t num_classes,
         std::uint8_t ignore, double beta) {
        sf::WfbParams p;
        p.beta = beta;
        const auto r = sf::weighted_fbeta_multiclass(
            to_labels(pred, "pred", ignore), to_labels(gt, "gt", ignore),
            num_classes, ignore, p);
        return py::make_tuple(r.macro, optional_list(r.per_class));
      },
      py::arg("pred"), py::arg("gt"), py::arg("num_classes"),
      py::arg("ignore") = sf::kIgnoreLabel, py::arg("beta") = 1.0);

  m.def(
      "evaluate",
      [](const std::filesystem::path& pred_dir,
         const std::filesystem::path& gt_dir, std::size_t num_classes,
         std::uint8_t ignore, double beta, const std::string& miou_policy,
         std::size_t workers) {
        sf::EvalConfig cfg;
        cfg.num_classes = num_classes;
        cfg.ignore_value = ignore;
        cfg.wfb.beta = beta;
        cfg.miou_policy = sf::parse_miou_policy(miou_policy);
        cfg.workers = workers;
        sf::EvalReport r;
        {
          py::gil_scoped_release release;
          r = sf::evaluate(pred_dir, gt_dir, cfg);
        }
        return to_python(r.to_json());
      },
      py::arg("pred_dir"), py::arg("gt_dir"), py::arg("num_classes"),
      py::arg("ignore") = sf::kIgnoreLabel, py::arg("beta") = 1.0,
      py::arg("miou_policy") = "all_classes", py::arg("workers") = 0,
      "Score two directories of label PNGs; returns the JSON report as a dict.");

  m.def(
      "selfcheck",
      [](std::uint64_t seed, std::size_t trials) {
        sf::SelfcheckReport r;
        {
          py::gil_scoped_release release;
          r = sf::run_selfcheck({seed, trials});
        }
        return to_python(r.document);
      },
      py::arg("seed") = 1, py::arg("trials") = 100);

  m.def(
      "read_label_png",
      [](const std::filesystem::path& path) {
        return to_array<std::uint8_t>(sf::read_label_png(path));
      },
      py::arg("path"));

  m.def(
      "write_label_png",
      [](const U8Array& labels, const std::filesystem::path& path) {
        sf::write_label_png(to_labels(labels, "labels"), path);
      },
      py::arg("labels"), py::arg("path"));
}

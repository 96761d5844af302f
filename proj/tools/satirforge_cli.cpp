// satirforge: pseudo-label datasets from teacher mask dumps, plus evaluation
// and dataset tooling.
//
// Exit codes: 0 success, 1 completed with findings, 2 usage or I/O error.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "satirforge/error.hpp"
#include "satirforge/evaluate.hpp"
#include "satirforge/image_io.hpp"
#include "satirforge/manifest.hpp"
#include "satirforge/oracle.hpp"
#include "satirforge/pipeline.hpp"
#include "satirforge/rle.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace satirforge;

namespace {

constexpr int kOk = 0;
constexpr int kFindings = 1;
constexpr int kUsage = 2;

void write_report(const json& doc, const std::string& path) {
  if (path.empty()) return;
  const std::string text = doc.dump(2) + "\n";
  write_file_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(
                                        text.data()),
                                    text.size()));
}

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

struct ComposeArgs {
  std::string masks_dir, images_dir, out_dir, rank_key = "predicted_quality";
  std::string tie_breakers, source_tag;
  double threshold = 0.88;
  std::size_t max_masks = 16;
  std::uint64_t min_area = 0;
  std::size_t workers = 0;
};

int run_compose_cmd(const ComposeArgs& a) {
  PipelineConfig cfg;
  cfg.masks_dir = a.masks_dir;
  cfg.images_dir = a.images_dir;
  cfg.out_dir = a.out_dir;
  cfg.rank.key = parse_rank_key(a.rank_key);
  for (const auto& tb : split_csv(a.tie_breakers)) {
    cfg.rank.tie_breakers.push_back(parse_rank_key(tb));
  }
  cfg.rank.threshold = a.threshold;
  cfg.rank.max_masks = a.max_masks;
  cfg.compose.max_categories = a.max_masks;
  cfg.compose.min_mask_area = a.min_area;
  cfg.workers = a.workers;
  cfg.source_tag = a.source_tag;
  const auto t0 = std::chrono::steady_clock::now();
  const ComposeSummary s = run_compose(cfg);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  for (const auto& f : s.failures) std::cout << "failed: " << f << '\n';
  std::cout << s.summary_line() << '\n';
  std::fprintf(stdout, "throughput: %.1f images/s over %.2f s\n",
               secs > 0 ? static_cast<double>(s.inputs) / secs : 0.0, secs);
  return s.failures.empty() ? kOk : kFindings;
}

struct EvalArgs {
  std::string pred_dir, gt_dir, report, miou_policy = "all_classes";
  std::size_t classes = 0;
  int ignore = 255;
  double beta = 1.0;
  std::size_t workers = 0;
};

int run_eval_cmd(const EvalArgs& a) {
  EvalConfig cfg;
  cfg.num_classes = a.classes;
  cfg.ignore_value = static_cast<std::uint8_t>(a.ignore);
  cfg.miou_policy = parse_miou_policy(a.miou_policy);
  cfg.wfb.beta = a.beta;
  cfg.workers = a.workers;
  const EvalReport r = evaluate(a.pred_dir, a.gt_dir, cfg);
  std::cout << r.to_text();
  write_report(r.to_json(), a.report);
  return r.missing_pairs.empty() && r.failures.empty() ? kOk : kFindings;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"satirforge: teacher-mask pseudo-labels, metrics and dataset "
               "tooling"};
  app.require_subcommand(1);

  ComposeArgs compose;
  auto* c = app.add_subcommand("compose", "Turn mask dumps into label maps + manifest");
  c->add_option("--masks-dir", compose.masks_dir, "Directory of <stem>.json mask dumps")->required();
  c->add_option("--images-dir", compose.images_dir, "Images whose headers give the label size");
  c->add_option("--out-dir", compose.out_dir, "Output root (labels/ and manifest.jsonl)")->required();
  c->add_option("--threshold", compose.threshold, "Minimum predicted quality")->capture_default_str()->check(CLI::Range(0.0, 1.0));
  c->add_option("--max-masks", compose.max_masks, "Categories per image (K)")->capture_default_str()->check(CLI::Range(1, 254));
  c->add_option("--rank-key", compose.rank_key, "predicted_quality | stability | area | source_order")->capture_default_str();
  c->add_option("--tie-breakers", compose.tie_breakers, "Comma-separated rank keys");
  c->add_option("--min-area", compose.min_area, "Skip masks smaller than this many pixels")->capture_default_str();
  c->add_option("--source-tag", compose.source_tag, "Tag for ids without a subdirectory");
  c->add_option("--workers", compose.workers, "Worker threads (0 = auto)")->capture_default_str();

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Score prediction label maps against ground truth");
  e->add_option("--pred-dir", ev.pred_dir)->required();
  e->add_option("--gt-dir", ev.gt_dir)->required();
  e->add_option("--classes", ev.classes, "Number of classes C")->required()->check(CLI::Range(1, 256));
  e->add_option("--ignore", ev.ignore, "Ignored ground-truth label")->capture_default_str()->check(CLI::Range(0, 255));
  e->add_option("--beta", ev.beta, "F-measure beta")->capture_default_str();
  e->add_option("--miou-policy", ev.miou_policy, "all_classes | present_classes")->capture_default_str();
  e->add_option("--report", ev.report, "Write the JSON report here");
  e->add_option("--workers", ev.workers)->capture_default_str();

  std::string m_images, m_labels, m_out, m_tag;
  std::size_t m_workers = 0;
  auto* mb = app.add_subcommand("manifest", "Index an images/ + labels/ tree");
  mb->add_option("--images-dir", m_images)->required();
  mb->add_option("--labels-dir", m_labels)->required();
  mb->add_option("--out", m_out, "Manifest path")->required();
  mb->add_option("--source-tag", m_tag);
  mb->add_option("--workers", m_workers);

  std::string v_manifest, v_report;
  std::size_t v_classes = 0, v_workers = 0;
  auto* v = app.add_subcommand("validate", "Check manifest pairs and label ranges");
  v->add_option("--manifest", v_manifest)->required();
  v->add_option("--classes", v_classes)->required()->check(CLI::Range(1, 256));
  v->add_option("--report", v_report);
  v->add_option("--workers", v_workers);

  std::string s_manifest, s_report;
  std::size_t s_workers = 0;
  auto* st = app.add_subcommand("stats", "Category frequencies, sizes and tags");
  st->add_option("--manifest", s_manifest)->required();
  st->add_option("--report", s_report);
  st->add_option("--workers", s_workers);

  std::string sp_manifest, sp_out, sp_names;
  std::vector<double> sp_fractions;
  std::uint64_t sp_seed = 0;
  auto* sp = app.add_subcommand("split", "Deterministic manifest splits");
  sp->add_option("--manifest", sp_manifest)->required();
  sp->add_option("--fractions", sp_fractions, "e.g. 0.8,0.2")->required()->delimiter(',');
  sp->add_option("--seed", sp_seed)->capture_default_str();
  sp->add_option("--names", sp_names, "Comma-separated output names");
  sp->add_option("--out-dir", sp_out, "Defaults to the manifest's directory");

  std::uint64_t sc_seed = 1;
  std::size_t sc_trials = 100;
  std::string sc_report;
  auto* sc = app.add_subcommand("selfcheck", "Compare engines against brute-force oracles");
  sc->add_option("--seed", sc_seed)->capture_default_str();
  sc->add_option("--trials", sc_trials)->capture_default_str();
  sc->add_option("--report", sc_report);

  std::string r_counts, r_runs;
  std::uint32_t r_h = 0, r_w = 0;
  bool r_grid = false;
  auto* rle = app.add_subcommand("rle", "COCO counts-string codec");
  rle->require_subcommand(1);
  auto* rd = rle->add_subcommand("decode", "Counts string -> runs");
  rd->add_option("--counts", r_counts)->required();
  rd->add_option("--height", r_h)->required();
  rd->add_option("--width", r_w)->required();
  rd->add_flag("--grid", r_grid, "Print the mask as rows of 0/1");
  auto* re = rle->add_subcommand("encode", "Runs -> counts string");
  re->add_option("--runs", r_runs, "Comma-separated run lengths")->required();
  re->add_option("--height", r_h)->required();
  re->add_option("--width", r_w)->required();

  std::string sy_out;
  std::size_t sy_count = 10, sy_masks = 16, sy_workers = 0;
  std::uint32_t sy_h = 512, sy_w = 512;
  std::uint64_t sy_seed = 1;
  double sy_min_quality = 0.5;
  bool sy_no_images = false;
  auto* sy = app.add_subcommand("synth", "Write a synthetic mask-dump corpus");
  sy->add_option("--out-dir", sy_out)->required();
  sy->add_option("--count", sy_count)->capture_default_str();
  sy->add_option("--height", sy_h)->capture_default_str();
  sy->add_option("--width", sy_w)->capture_default_str();
  sy->add_option("--masks", sy_masks)->capture_default_str()->check(CLI::Range(0, 254));
  sy->add_option("--seed", sy_seed)->capture_default_str();
  sy->add_option("--min-quality", sy_min_quality, "Lower bound of drawn qualities")->capture_default_str()->check(CLI::Range(0.0, 1.0));
  sy->add_flag("--no-images", sy_no_images, "Write dumps only");
  sy->add_option("--workers", sy_workers);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& ex) {
    return app.exit(ex);
  } catch (const CLI::ParseError& ex) {
    app.exit(ex);
    return kUsage;
  }

  try {
    if (*c) return run_compose_cmd(compose);
    if (*e) return run_eval_cmd(ev);

    if (*mb) {
      ManifestRules rules;
      rules.source_tag = m_tag;
      rules.workers = m_workers;
      const fs::path out(m_out);
      const BuildResult b = build_manifest(
          m_images, m_labels, rules,
          out.has_parent_path() ? out.parent_path() : fs::path("."));
      write_manifest(b.manifest, out);
      for (const auto& u : b.unpaired) std::cout << u << '\n';
      std::cout << "manifest: " << b.manifest.entries.size() << " entries, "
                << b.unpaired.size() << " unpaired\n";
      return b.unpaired.empty() ? kOk : kFindings;
    }

    if (*v) {
      const Manifest m = read_manifest(v_manifest);
      const ValidationReport r = validate_pairs(m, v_classes, v_workers);
      for (const auto& f : r.findings) {
        std::cout << to_string(f.kind) << ' ' << f.id << ": " << f.detail
                  << '\n';
      }
      std::cout << "validate: " << r.entries_checked << " entries, "
                << r.findings.size() << " findings\n";
      write_report(r.to_json(), v_report);
      return r.findings.empty() ? kOk : kFindings;
    }

    if (*st) {
      const Manifest m = read_manifest(s_manifest);
      const StatsReport r = dataset_stats(m, s_workers);
      const json doc = r.to_json();
      std::cout << "images: " << r.images << " (read " << r.images_read
                << "), pixels: " << r.total_pixels << '\n';
      for (const auto& [k, f] : doc["category_frequency"].items()) {
        std::printf("  category %3s  %.6f\n", k.c_str(), f.get<double>());
      }
      for (const auto& [size, n] : r.size_histogram) {
        std::cout << "  size " << size << ": " << n << '\n';
      }
      for (const auto& [tag, n] : r.source_tags) {
        std::cout << "  tag '" << tag << "': " << n << '\n';
      }
      for (const auto& err : r.errors) std::cout << "error: " << err << '\n';
      write_report(doc, s_report);
      return r.errors.empty() ? kOk : kFindings;
    }

    if (*sp) {
      const fs::path src(sp_manifest);
      const Manifest m = read_manifest(src);
      auto names = split_csv(sp_names);
      if (!names.empty() && names.size() != sp_fractions.size()) {
        std::cerr << "--names must match --fractions in length\n";
        return kUsage;
      }
      for (std::size_t i = names.size(); i < sp_fractions.size(); ++i) {
        names.push_back("split" + std::to_string(i));
      }
      const fs::path out_dir =
          sp_out.empty() ? (src.has_parent_path() ? src.parent_path()
                                                  : fs::path("."))
                         : fs::path(sp_out);
      auto parts = split_manifest(m, sp_fractions, sp_seed);
      for (std::size_t i = 0; i < parts.size(); ++i) {
        rebase_manifest(parts[i], out_dir);
        write_manifest(parts[i], out_dir / (names[i] + ".jsonl"));
        std::cout << names[i] << ": " << parts[i].entries.size()
                  << " entries\n";
      }
      return kOk;
    }

    if (*sc) {
      const SelfcheckReport r = run_selfcheck({sc_seed, sc_trials});
      for (const auto& [name, entry] : r.document["checks"].items()) {
        std::printf("%-18s %s  max deviation %.3g (tolerance %.3g, %zu trials)\n",
                    name.c_str(), entry["pass"].get<bool>() ? "PASS" : "FAIL",
                    entry["max_deviation"].get<double>(),
                    entry["tolerance"].get<double>(),
                    entry["trials"].get<std::size_t>());
      }
      write_report(r.document, sc_report);
      return r.ok ? kOk : kFindings;
    }

    if (*rd) {
      const RleMask m = decode_counts_string(r_counts, r_h, r_w);
      if (r_grid) {
        const BitMask b = rle_to_bitmask(m);
        for (std::uint32_t row = 0; row < b.height(); ++row) {
          for (std::uint32_t col = 0; col < b.width(); ++col) {
            std::cout << (b.test(row, col) ? '1' : '0');
          }
          std::cout << '\n';
        }
      } else {
        std::cout << json(m.runs).dump() << '\n';
      }
      return kOk;
    }

    if (*re) {
      std::vector<std::int64_t> runs;
      for (const auto& s : split_csv(r_runs)) runs.push_back(std::stoll(s));
      std::cout << encode_counts_string(rle_from_counts(runs, r_h, r_w))
                << '\n';
      return kOk;
    }

    if (*sy) {
      SynthParams p;
      p.min_height = p.max_height = sy_h;
      p.min_width = p.max_width = sy_w;
      p.min_shapes = p.max_shapes = sy_masks;
      p.min_quality = sy_min_quality;
      write_synth_corpus(sy_out, sy_count, p, sy_seed, sy_workers,
                         !sy_no_images);
      std::cout << "synth: " << sy_count << " scenes written to " << sy_out
                << '\n';
      return kOk;
    }
  } catch (const EmptyEvaluation& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return kFindings;
  } catch (const satirforge::Error& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return kUsage;
  } catch (const std::invalid_argument& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return kUsage;
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return kUsage;
  }
  return kUsage;
}

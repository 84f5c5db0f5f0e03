// hycount: command-line driver for hybrid detection/density counting.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "hycount/hycount.hpp"

namespace fs = std::filesystem;
using namespace hycount;

namespace {

enum ExitCode : int {
  kOk = 0,
  kInternal = 1,
  kUsage = 2,
  kInput = 3,
  kBackend = 4,
  kIo = 5,
  kInfeasible = 6,
};

const char* kExitCodes =
    "Exit codes:\n"
    "  0  success\n"
    "  1  internal error\n"
    "  2  usage error (unknown flag, missing or invalid option value)\n"
    "  3  malformed input file (annotations, replay, parameters)\n"
    "  4  backend error (replay miss, density grid dimension mismatch)\n"
    "  5  I/O error (cannot read or write a file)\n"
    "  6  infeasible synthetic scene spec\n"
    "All configuration comes from flags; no environment variables are read.";

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_argument: return kUsage;
    case ErrorKind::parse: return kInput;
    case ErrorKind::replay_miss:
    case ErrorKind::dimension_mismatch:
    case ErrorKind::backend: return kBackend;
    case ErrorKind::io: return kIo;
    case ErrorKind::infeasible_spec: return kInfeasible;
  }
  return kInternal;
}

struct PipelineFlags {
  std::string annotations;
  std::string detector;
  std::string density;
  std::string switch_threshold = "165";
  double count_score_threshold = 0.25;
  std::size_t window = 256;
  double overlap = 0.2;
  double nms_iou = 0.5;
  double prune_epsilon = 0.001;
  std::string nms_mode = "soft";
  std::string merge = "global";
  std::size_t density_scale = 8;
  double sigma = 4.0;
  double truncation = 4.0;

  hybrid::HybridConfig config() const {
    hybrid::HybridConfig c;
    if (switch_threshold == "never" || switch_threshold == "inf") {
      c.switch_threshold = hybrid::kNeverSwitch;
    } else {
      try {
        std::size_t used = 0;
        c.switch_threshold = std::stod(switch_threshold, &used);
        if (used != switch_threshold.size()) throw std::invalid_argument("trailing");
      } catch (const std::exception&) {
        fail(ErrorKind::invalid_argument, "--switch-threshold must be a number or 'never'");
      }
    }
    c.count_score_threshold = count_score_threshold;
    c.window = window;
    c.overlap_ratio = overlap;
    c.nms.iou_threshold = nms_iou;
    c.nms.prune_epsilon = prune_epsilon;
    c.nms.mode = nms_mode == "hard" ? nms::Mode::hard : nms::Mode::soft_linear;
    c.merge.mode = merge == "concat" ? tiling::MergeMode::concatenate : tiling::MergeMode::global_nms;
    c.validate();
    return c;
  }

  density::KernelConfig kernel() const {
    density::KernelConfig k{sigma, truncation};
    k.validate();
    return k;
  }
};

struct CommonFlags {
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
};

void add_common(CLI::App* app, CommonFlags& f) {
  app->add_option("--seed", f.seed, "Seed for every random draw")->capture_default_str();
  app->add_option("--jobs", f.jobs, "Maximum worker threads")->capture_default_str()->check(CLI::PositiveNumber);
}

void add_pipeline(CLI::App* app, PipelineFlags& f, bool need_density) {
  app->add_option("--annotations", f.annotations, "Annotation file (NDJSON)")->required();
  app->add_option("--detector", f.detector, "Detector backend: replay:<file> | synthetic[:<params.json>]")->required();
  auto* den = app->add_option("--density", f.density,
                              "Density backend: replay:<file> | synthetic[:<params.json>]");
  if (need_density) den->required();
  app->add_option("--switch-threshold", f.switch_threshold, "Detector count at which density takes over, or 'never'")
      ->capture_default_str();
  app->add_option("--count-score-threshold", f.count_score_threshold, "Minimum score counted toward N1")
      ->capture_default_str();
  app->add_option("--window", f.window, "Tile side in pixels")->capture_default_str();
  app->add_option("--overlap", f.overlap, "Tile overlap ratio in [0, 1)")->capture_default_str();
  app->add_option("--nms-iou", f.nms_iou, "NMS IoU threshold")->capture_default_str();
  app->add_option("--prune-epsilon", f.prune_epsilon, "Soft-NMS score floor")->capture_default_str();
  app->add_option("--nms-mode", f.nms_mode, "NMS variant")->capture_default_str()->check(CLI::IsMember({"soft", "hard"}));
  app->add_option("--merge", f.merge, "Cross-tile merge: global NMS pass or plain concatenation")
      ->capture_default_str()
      ->check(CLI::IsMember({"global", "concat"}));
  app->add_option("--density-scale", f.density_scale, "Native density grid downscale factor")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  app->add_option("--sigma", f.sigma, "Gaussian kernel sigma (pixels) for synthetic density maps")->capture_default_str();
  app->add_option("--truncation", f.truncation, "Kernel truncation radius in sigmas")->capture_default_str();
}

std::shared_ptr<const Dataset> load_dataset(const std::string& path) {
  return std::make_shared<const Dataset>(annotations::load_annotations(path));
}

std::pair<std::string, std::string> split_uri(const std::string& uri) {
  const auto colon = uri.find(':');
  if (colon == std::string::npos) return {uri, ""};
  return {uri.substr(0, colon), uri.substr(colon + 1)};
}

synthetic::SyntheticErrorModel load_model(const std::string& path, std::uint64_t seed) {
  synthetic::SyntheticErrorModel m;
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::io, "cannot open '" + path + "'");
    try {
      m = nlohmann::json::parse(in).get<synthetic::SyntheticErrorModel>();
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::parse, path + ": " + e.what());
    }
  }
  m.seed = seed;
  m.validate();
  return m;
}

std::unique_ptr<DetectorBackend> make_detector(const std::string& uri, std::shared_ptr<const Dataset> ds,
                                               std::uint64_t seed) {
  const auto [scheme, arg] = split_uri(uri);
  if (scheme == "replay") {
    if (arg.empty()) fail(ErrorKind::invalid_argument, "replay detector needs a path: replay:<file>");
    return std::make_unique<replay::ReplayDetector>(replay::load_detections(arg));
  }
  if (scheme == "synthetic") return std::make_unique<synthetic::SyntheticDetector>(ds, load_model(arg, seed));
  fail(ErrorKind::invalid_argument, "unknown detector backend '" + uri + "'");
}

std::unique_ptr<DensityBackend> make_density(const std::string& uri, std::shared_ptr<const Dataset> ds,
                                             std::uint64_t seed, const PipelineFlags& f) {
  const auto [scheme, arg] = split_uri(uri);
  if (scheme == "replay") {
    if (arg.empty()) fail(ErrorKind::invalid_argument, "replay density needs a path: replay:<file>");
    return std::make_unique<replay::ReplayDensity>(replay::load_densities(arg), f.density_scale);
  }
  if (scheme == "synthetic")
    return std::make_unique<synthetic::SyntheticDensity>(ds, load_model(arg, seed), f.density_scale, f.kernel());
  fail(ErrorKind::invalid_argument, "unknown density backend '" + uri + "'");
}

nlohmann::json header(const PipelineFlags& f, const CommonFlags& c) {
  return {{"config", report::config_json(f.config())},
          {"kernel", report::kernel_json(f.kernel())},
          {"annotations", f.annotations},
          {"detector", f.detector},
          {"density", f.density},
          {"density_scale", f.density_scale},
          {"seed", c.seed}};
}

std::ofstream open_output(const std::string& path) {
  const fs::path p(path);
  if (p.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(p.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::io, "cannot write '" + path + "'");
  return out;
}

std::vector<hybrid::CountResult> count_all(const Dataset& ds, const DetectorBackend& det, const DensityBackend& den,
                                           const hybrid::HybridConfig& cfg, std::size_t jobs) {
  std::vector<hybrid::CountResult> results(ds.scenes.size());
  const bool parallel = det.capabilities().concurrent_safe && den.capabilities().concurrent_safe;
  parallel_for(ds.scenes.size(), parallel ? jobs : 1, [&](std::size_t i) {
    results[i] = hybrid::hybrid_count(ds.scenes[i].image(), det, den, cfg);
  });
  return results;
}

int cmd_count(const PipelineFlags& f, const CommonFlags& c, const std::string& output) {
  const auto cfg = f.config();
  auto ds = load_dataset(f.annotations);
  auto det = make_detector(f.detector, ds, c.seed);
  auto den = make_density(f.density, ds, c.seed, f);
  const auto results = count_all(*ds, *det, *den, cfg, c.jobs);
  auto out = open_output(output);
  report::write_counts(out, results, header(f, c));
  return kOk;
}

int cmd_eval(const PipelineFlags& f, const CommonFlags& c, double iou, const std::string& output,
             const std::string& pr_path, bool quiet) {
  const auto cfg = f.config();
  auto ds = load_dataset(f.annotations);
  if (ds->scenes.empty()) fail(ErrorKind::invalid_argument, "annotation file has no images");
  auto det = make_detector(f.detector, ds, c.seed);
  auto den = make_density(f.density, ds, c.seed, f);
  // AP scores the full split-merge output of every image; counting and
  // confusion use the routed hybrid results.
  std::vector<hybrid::DetectorPass> passes(ds->scenes.size());
  parallel_for(ds->scenes.size(), det->capabilities().concurrent_safe ? c.jobs : 1, [&](std::size_t i) {
    passes[i] = hybrid::run_detector(ds->scenes[i].image(), *det, cfg);
  });
  std::vector<metrics::ImageEval> evals;
  std::vector<hybrid::CountResult> results;
  for (std::size_t i = 0; i < ds->scenes.size(); ++i) {
    const Scene& s = ds->scenes[i];
    evals.push_back({passes[i].detections, s.boxes});
    results.push_back(hybrid::route(s.image(), std::move(passes[i]), cfg.switch_threshold,
                                    [&] { return hybrid::run_density(s.image(), *den); }));
  }
  std::vector<metrics::ImageMatching> matchings;
  std::vector<metrics::CountPair> pairs;
  nlohmann::json images = nlohmann::json::array();
  for (std::size_t i = 0; i < ds->scenes.size(); ++i) {
    const Scene& s = ds->scenes[i];
    const auto& r = results[i];
    pairs.push_back({r.count, static_cast<double>(s.count())});
    metrics::ImageMatching im{s.id, std::nullopt};
    if (r.branch == hybrid::Branch::detector) {
      std::vector<Detection> counted;
      for (const auto& d : *r.detections)
        if (d.score >= cfg.count_score_threshold) counted.push_back(d);
      im.matching = metrics::match_detections(counted, s.boxes, iou);
    }
    matchings.push_back(im);
    nlohmann::json row = report::count_json(r);
    row["truth"] = s.count();
    if (im.matching) {
      row["tp"] = im.matching->tp();
      row["fp"] = im.matching->fp();
      row["fn"] = im.matching->fn();
    } else {
      row["tp"] = row["fp"] = row["fn"] = nullptr;
    }
    images.push_back(row);
  }
  const auto confusion = metrics::confusion_report(matchings);
  const auto curve = metrics::pr_curve(evals, iou);
  std::size_t total_gt = 0;
  for (const auto& s : ds->scenes) total_gt += s.boxes.size();
  // NaN marks an undefined AP (no ground truth anywhere).
  const double ap = total_gt ? metrics::average_precision(curve) : std::nan("");
  const double mae = metrics::mae(pairs);
  const double rmse = metrics::rmse(pairs);

  nlohmann::json j = header(f, c);
  j["schema"] = "hycount-eval";
  j["version"] = 1;
  j["iou_threshold"] = iou;
  j["summary"] = {{"images", ds->scenes.size()},
                  {"ap", std::isnan(ap) ? nlohmann::json(nullptr) : nlohmann::json(ap)},
                  {"mae", mae},
                  {"rmse", rmse},
                  {"tp", confusion.totals.tp},
                  {"fp", confusion.totals.fp},
                  {"fn", confusion.totals.fn}};
  j["images"] = images;
  if (!output.empty()) {
    auto out = open_output(output);
    out << j.dump(2) << '\n';
  }
  if (!pr_path.empty()) {
    auto out = open_output(pr_path);
    report::write_pr_curve(out, curve);
  }
  if (!quiet) {
    report::write_confusion_table(std::cout, confusion);
    const std::string ap_text = std::isnan(ap) ? std::string("n/a") : report::fmt(ap, "%.4f");
    std::cout << "AP@" << iou << "  " << ap_text << '\n'
              << "MAE    " << report::fmt(mae, "%.4f") << '\n'
              << "RMSE   " << report::fmt(rmse, "%.4f") << '\n';
  }
  return kOk;
}

struct SweepFlags {
  std::string param;
  std::optional<double> from, to, step;
  std::vector<double> values;
  double iou = 0.5;
  std::string output;
  std::string curve;
  std::string rmse_curve;
  bool no_cache = false;
  bool quiet = false;
};

int cmd_sweep(const PipelineFlags& f, const CommonFlags& c, const SweepFlags& s) {
  std::vector<double> values = s.values;
  if (values.empty()) {
    if (!s.from || !s.to || !s.step) fail(ErrorKind::invalid_argument, "sweep needs --values or --from/--to/--step");
    values = sweeps::expand({*s.from, *s.to, *s.step});
  } else if (s.from || s.to || s.step) {
    fail(ErrorKind::invalid_argument, "use either --values or --from/--to/--step, not both");
  }
  const auto cfg = f.config();
  auto ds = load_dataset(f.annotations);
  auto det = make_detector(f.detector, ds, c.seed);
  sweeps::SweepOptions opts{c.jobs, !s.no_cache, s.iou};
  sweeps::SweepReport rep;
  if (s.param == "switch-threshold") {
    if (f.density.empty()) fail(ErrorKind::invalid_argument, "switch-threshold sweeps need --density");
    auto den = make_density(f.density, ds, c.seed, f);
    rep = sweeps::sweep_switch_threshold(*ds, *det, *den, cfg, values, opts);
  } else if (s.param == "window") {
    rep = sweeps::sweep_window(*ds, *det, cfg, values, opts);
  } else {
    rep = sweeps::sweep_overlap(*ds, *det, cfg, values, opts);
  }
  nlohmann::json j = report::sweep_json(rep);
  j["header"] = header(f, c);
  if (!s.output.empty()) {
    auto out = open_output(s.output);
    out << j.dump(2) << '\n';
  }
  if (!s.curve.empty()) {
    auto out = open_output(s.curve);
    report::write_sweep_curve(out, rep, report::primary_metric(rep.parameter));
  }
  if (!s.rmse_curve.empty()) {
    if (rep.parameter != sweeps::Parameter::switch_threshold)
      fail(ErrorKind::invalid_argument, "--rmse-curve only applies to switch-threshold sweeps");
    auto out = open_output(s.rmse_curve);
    report::write_sweep_curve(out, rep, "rmse");
  }
  if (!s.quiet) report::write_sweep_table(std::cout, rep);
  return kOk;
}

struct SynthFlags {
  std::size_t images = 0;
  std::size_t high_images = 0;
  std::optional<std::size_t> high_cut;
  bool benchmark = false;
  std::string out_dir;
  bool emit_replay = false;
  std::string params;
  std::size_t window = 256;
  double overlap = 0.2;
  std::size_t density_scale = 8;
};

int cmd_synth(const SynthFlags& s, const CommonFlags& c) {
  synthgen::BenchmarkSpec spec;
  if (!s.benchmark) {
    spec.normal_images = s.images;
    spec.high_images = s.high_images;
  }
  if (spec.normal_images + spec.high_images == 0)
    fail(ErrorKind::invalid_argument, "synth needs --images N (N >= 1), --high-density-images, or --benchmark");
  const Dataset ds = synthgen::generate_benchmark(spec, c.seed);
  const auto written = synthgen::write_dataset(ds, s.out_dir, c.seed, s.high_cut);
  if (s.emit_replay) {
    auto shared = std::make_shared<const Dataset>(ds);
    const auto model = load_model(s.params, c.seed);
    synthetic::SyntheticDetector det(shared, model);
    synthetic::SyntheticDensity den(shared, model, s.density_scale);
    replay::DetectionIndex dets;
    replay::DensityIndex grids;
    std::vector<std::vector<Detection>> per_image(ds.scenes.size());
    std::vector<density::DensityMap> per_grid(ds.scenes.size());
    // Stored detections are the remapped tile outputs before any NMS, so the
    // replay pipeline applies exactly one merge pass.
    nms::NmsConfig nms_cfg;
    tiling::MergeOptions merge{tiling::MergeMode::concatenate, 1};
    parallel_for(ds.scenes.size(), c.jobs, [&](std::size_t i) {
      const Scene& sc = ds.scenes[i];
      const auto plan = tiling::plan_tiles(sc.width, sc.height, s.window, s.overlap);
      per_image[i] = tiling::split_merge_detect(sc.image(), det, plan, nms_cfg, merge);
      per_grid[i] = den.estimate_native(sc.image());
    });
    for (std::size_t i = 0; i < ds.scenes.size(); ++i) {
      dets.emplace(ds.scenes[i].id, std::move(per_image[i]));
      grids.emplace(ds.scenes[i].id, std::move(per_grid[i]));
    }
    {
      auto out = open_output((fs::path(s.out_dir) / "detections.ndjson").string());
      replay::write_detections(out, dets);
    }
    {
      auto out = open_output((fs::path(s.out_dir) / "density.bin").string());
      replay::write_densities(out, grids);
    }
  }
  return kOk;
}

int cmd_density_gen(const std::string& annotations_path, const std::string& output, double sigma, double truncation,
                    std::size_t scale, const std::string& csv_dir) {
  const density::KernelConfig k{sigma, truncation};
  k.validate();
  const Dataset ds = annotations::load_annotations(annotations_path);
  replay::DensityIndex grids;
  for (const auto& s : ds.scenes) {
    density::DensityMap map;
    try {
      map = density::sum_pool(density::generate_density_map(s.points, s.width, s.height, k), scale);
    } catch (const Error& e) {
      throw Error(e.kind(), "image '" + s.id + "': " + e.what());
    }
    if (!csv_dir.empty()) {
      auto out = open_output((fs::path(csv_dir) / (s.id + ".csv")).string());
      density::write_grid_csv(out, map);
    }
    grids.emplace(s.id, std::move(map));
  }
  auto out = open_output(output);
  replay::write_densities(out, grids);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hycount: count tiny objects with tiled detection, soft-NMS and a density-map fallback"};
  app.footer(kExitCodes);
  app.require_subcommand(1);

  CommonFlags common;
  PipelineFlags pipe;

  std::string count_output;
  auto* count = app.add_subcommand("count", "Hybrid-count every image in an annotation file");
  add_common(count, common);
  add_pipeline(count, pipe, true);
  count->add_option("--output", count_output, "Per-image results file (NDJSON)")->required();
  count->footer(kExitCodes);

  double eval_iou = 0.5;
  std::string eval_output, eval_pr;
  bool eval_quiet = false;
  auto* eval = app.add_subcommand("eval", "AP, MAE, RMSE and per-image TP/FP/FN report");
  add_common(eval, common);
  add_pipeline(eval, pipe, true);
  eval->add_option("--iou", eval_iou, "IoU threshold for matching")->capture_default_str();
  eval->add_option("--output", eval_output, "Report file (JSON)");
  eval->add_option("--pr-curve", eval_pr, "Precision-recall curve file (recall precision)");
  eval->add_flag("--quiet", eval_quiet, "Do not print the tables");
  eval->footer(kExitCodes);

  SweepFlags sw;
  auto* sweep = app.add_subcommand("sweep", "Sweep the switch threshold, window size or overlap ratio");
  add_common(sweep, common);
  add_pipeline(sweep, pipe, false);
  sweep->add_option("--param", sw.param, "Parameter to sweep")
      ->required()
      ->check(CLI::IsMember({"switch-threshold", "window", "overlap"}));
  sweep->add_option("--from", sw.from, "Range start");
  sweep->add_option("--to", sw.to, "Range end (inclusive)");
  sweep->add_option("--step", sw.step, "Range step");
  sweep->add_option("--values", sw.values, "Explicit values (comma separated)")->delimiter(',');
  sweep->add_option("--iou", sw.iou, "IoU threshold for AP")->capture_default_str();
  sweep->add_option("--output", sw.output, "Report file (JSON)");
  sweep->add_option("--curve", sw.curve, "Curve file: value and MAE (thresholds) or AP");
  sweep->add_option("--rmse-curve", sw.rmse_curve, "Curve file: threshold and RMSE");
  sweep->add_flag("--no-cache", sw.no_cache, "Recompute detection for every threshold");
  sweep->add_flag("--quiet", sw.quiet, "Do not print the table");
  sweep->footer(kExitCodes);

  SynthFlags sy;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic annotated dataset");
  add_common(synth, common);
  synth->add_option("--images", sy.images, "Number of normal-density images");
  synth->add_option("--high-density-images", sy.high_images, "Number of high-density images");
  synth->add_option("--high-density-cut", sy.high_cut, "Flag images with at least this many objects as high density");
  synth->add_flag("--benchmark", sy.benchmark, "Default benchmark: 100 normal + 20 high-density images");
  synth->add_option("--out-dir", sy.out_dir, "Output directory")->required();
  synth->add_flag("--emit-replay", sy.emit_replay, "Also write detections.ndjson and density.bin from the synthetic model");
  synth->add_option("--synthetic-params", sy.params, "Synthetic error model parameters (JSON)");
  synth->add_option("--window", sy.window, "Tile side used for --emit-replay")->capture_default_str();
  synth->add_option("--overlap", sy.overlap, "Tile overlap used for --emit-replay")->capture_default_str();
  synth->add_option("--density-scale", sy.density_scale, "Native grid downscale for --emit-replay")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  synth->footer(kExitCodes);

  std::string dg_annotations, dg_output, dg_csv;
  double dg_sigma = 4.0, dg_trunc = 4.0;
  std::size_t dg_scale = 1;
  auto* dgen = app.add_subcommand("density-gen", "Ground-truth density maps from point labels");
  add_common(dgen, common);
  dgen->add_option("--annotations", dg_annotations, "Annotation file (NDJSON)")->required();
  dgen->add_option("--output", dg_output, "Density replay file")->required();
  dgen->add_option("--sigma", dg_sigma, "Gaussian sigma in pixels")->capture_default_str();
  dgen->add_option("--truncation", dg_trunc, "Kernel truncation radius in sigmas")->capture_default_str();
  dgen->add_option("--output-scale", dg_scale, "Sum-pool factor applied before writing")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  dgen->add_option("--csv-dir", dg_csv, "Also write one CSV grid per image here");
  dgen->footer(kExitCodes);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*count) return cmd_count(pipe, common, count_output);
    if (*eval) return cmd_eval(pipe, common, eval_iou, eval_output, eval_pr, eval_quiet);
    if (*sweep) return cmd_sweep(pipe, common, sw);
    if (*synth) return cmd_synth(sy, common);
    if (*dgen) return cmd_density_gen(dg_annotations, dg_output, dg_sigma, dg_trunc, dg_scale, dg_csv);
  } catch (const Error& e) {
    std::cerr << "hycount: " << to_string(e.kind()) << ": " << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "hycount: internal error: " << e.what() << '\n';
    return kInternal;
  }
  return kUsage;
}

#pragma once

// Report serialization. Machine-readable reports are JSON (or NDJSON for
// per-image count results); curves are whitespace-separated two-column text
// with one '#' header line. Every report carries the pipeline configuration
// it was produced with.

#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "hycount/density.hpp"
#include "hycount/hybrid.hpp"
#include "hycount/metrics.hpp"
#include "hycount/sweeps.hpp"

namespace hycount::report {

inline std::string fmt(double v, const char* spec = "%.17g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

inline nlohmann::json threshold_json(double t) { return std::isinf(t) ? nlohmann::json("never") : nlohmann::json(t); }

inline nlohmann::json config_json(const hybrid::HybridConfig& c) {
  return {{"switch_threshold", threshold_json(c.switch_threshold)},
          {"count_score_threshold", c.count_score_threshold},
          {"window", c.window},
          {"overlap_ratio", c.overlap_ratio},
          {"nms",
           {{"iou_threshold", c.nms.iou_threshold},
            {"prune_epsilon", c.nms.prune_epsilon},
            {"mode", c.nms.mode == nms::Mode::hard ? "hard" : "soft-linear"}}},
          {"merge", c.merge.mode == tiling::MergeMode::global_nms ? "global-nms" : "concatenate"}};
}

inline nlohmann::json kernel_json(const density::KernelConfig& k) {
  return {{"sigma", k.sigma}, {"truncation_radius", k.truncation_radius}};
}

inline nlohmann::json count_json(const hybrid::CountResult& r) {
  return {{"id", r.image},
          {"count", r.count},
          {"branch", hybrid::to_string(r.branch)},
          {"n1", r.n1},
          {"n2", r.n2 ? nlohmann::json(*r.n2) : nlohmann::json(nullptr)}};
}

/// NDJSON: a header line with the configuration, then one line per image.
inline void write_counts(std::ostream& os, const std::vector<hybrid::CountResult>& results,
                         const nlohmann::json& header) {
  nlohmann::json h = header;
  h["schema"] = "hycount-counts";
  h["version"] = 1;
  os << h.dump() << '\n';
  for (const auto& r : results) os << count_json(r).dump() << '\n';
}

inline void write_pr_curve(std::ostream& os, const metrics::PrCurve& curve) {
  os << "# recall precision\n";
  for (const auto& p : curve.points) os << fmt(p.recall) << ' ' << fmt(p.precision) << '\n';
}

inline const char* primary_metric(sweeps::Parameter p) {
  return p == sweeps::Parameter::switch_threshold ? "mae" : "ap";
}

inline nlohmann::json sweep_json(const sweeps::SweepReport& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : r.rows) {
    nlohmann::json j{{"value", row.value}};
    if (row.mae) j["mae"] = *row.mae;
    if (row.rmse) j["rmse"] = *row.rmse;
    if (row.ap) j["ap"] = *row.ap;
    rows.push_back(j);
  }
  nlohmann::json fixed = config_json(r.fixed);
  if (r.parameter == sweeps::Parameter::switch_threshold) fixed.erase("switch_threshold");
  if (r.parameter == sweeps::Parameter::window) fixed.erase("window");
  if (r.parameter == sweeps::Parameter::overlap) fixed.erase("overlap_ratio");
  nlohmann::json j{{"schema", "hycount-sweep"},
                   {"version", 1},
                   {"parameter", sweeps::to_string(r.parameter)},
                   {"metric", primary_metric(r.parameter)},
                   {"fixed", fixed},
                   {"rows", rows},
                   {"best", {{"index", r.best}, {"value", r.rows.at(r.best).value}}}};
  if (r.parameter != sweeps::Parameter::switch_threshold) j["iou_threshold"] = r.iou_threshold;
  return j;
}

/// Two columns: parameter value and the chosen metric ("mae", "rmse" or "ap").
inline void write_sweep_curve(std::ostream& os, const sweeps::SweepReport& r, const std::string& metric) {
  os << "# " << sweeps::to_string(r.parameter) << ' ' << metric << '\n';
  for (const auto& row : r.rows) {
    const std::optional<double>& v = metric == "rmse" ? row.rmse : metric == "ap" ? row.ap : row.mae;
    os << fmt(row.value) << ' ' << (v ? fmt(*v) : std::string("nan")) << '\n';
  }
}

inline void write_sweep_table(std::ostream& os, const sweeps::SweepReport& r) {
  const bool counting = r.parameter == sweeps::Parameter::switch_threshold;
  char line[128];
  std::snprintf(line, sizeof line, "%-18s %12s %12s\n", sweeps::to_string(r.parameter), counting ? "MAE" : "AP",
                counting ? "RMSE" : "");
  os << line;
  for (std::size_t i = 0; i < r.rows.size(); ++i) {
    const auto& row = r.rows[i];
    if (counting)
      std::snprintf(line, sizeof line, "%-18g %12.4f %12.4f%s\n", row.value, *row.mae, *row.rmse,
                    i == r.best ? "  <- best" : "");
    else
      std::snprintf(line, sizeof line, "%-18g %12.4f %12s%s\n", row.value, *row.ap, "", i == r.best ? "  <- best" : "");
    os << line;
  }
}

inline void write_confusion_table(std::ostream& os, const metrics::ConfusionReport& c) {
  char line[160];
  std::snprintf(line, sizeof line, "%-24s %8s %8s %8s\n", "image", "TP", "FP", "FN");
  os << line;
  for (const auto& row : c.rows) {
    if (row.applicable)
      std::snprintf(line, sizeof line, "%-24s %8zu %8zu %8zu\n", row.image.c_str(), row.tp, row.fp, row.fn);
    else
      std::snprintf(line, sizeof line, "%-24s %8s %8s %8s\n", row.image.c_str(), "n/a", "n/a", "n/a");
    os << line;
  }
  std::snprintf(line, sizeof line, "%-24s %8zu %8zu %8zu\n", "total", c.totals.tp, c.totals.fp, c.totals.fn);
  os << line;
}

}  // namespace hycount::report

#pragma once

// Parameter sweeps. Switch-threshold sweeps score counting (MAE, RMSE);
// window and overlap sweeps score detection (AP). Detector passes are cached
// per pipeline configuration, so a threshold sweep runs detection once per
// image and only re-routes.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <sstream>
#include <string>
#include <vector>

#include "hycount/backend.hpp"
#include "hycount/errors.hpp"
#include "hycount/hybrid.hpp"
#include "hycount/metrics.hpp"
#include "hycount/parallel.hpp"
#include "hycount/scene.hpp"

namespace hycount::sweeps {

enum class Parameter { window, overlap, switch_threshold };

inline const char* to_string(Parameter p) {
  switch (p) {
    case Parameter::window: return "window";
    case Parameter::overlap: return "overlap";
    case Parameter::switch_threshold: return "switch-threshold";
  }
  return "?";
}

struct ValueRange {
  double from = 0.0;
  double to = 0.0;
  double step = 1.0;
};

/// from, from + step, ... up to `to` inclusive (a 1e-9 relative slack absorbs
/// rounding, so 0..200 step 5 gives 41 values).
inline std::vector<double> expand(const ValueRange& r) {
  if (!(r.step > 0.0) || !std::isfinite(r.step)) fail(ErrorKind::invalid_argument, "sweep step must be > 0");
  if (r.to < r.from) fail(ErrorKind::invalid_argument, "sweep range has to < from");
  const auto n = static_cast<std::size_t>(std::floor((r.to - r.from) / r.step + 1e-9)) + 1;
  std::vector<double> v;
  v.reserve(n);
  for (std::size_t i = 0; i < n; ++i) v.push_back(r.from + static_cast<double>(i) * r.step);
  return v;
}

struct SweepRow {
  double value = 0.0;
  std::optional<double> mae;
  std::optional<double> rmse;
  std::optional<double> ap;
};

struct SweepReport {
  Parameter parameter = Parameter::switch_threshold;
  hybrid::HybridConfig fixed;  // every parameter except the swept one
  double iou_threshold = 0.5;  // AP matching threshold (window/overlap sweeps)
  std::vector<SweepRow> rows;  // in request order
  std::size_t best = 0;        // MAE minimum or AP maximum; ties go to the smallest value
};

struct SweepOptions {
  std::size_t jobs = 1;
  bool use_cache = true;
  double iou_threshold = 0.5;
};

/// Detector passes keyed by pipeline configuration and image id. Readers
/// share the lock; inserts keep the first value written.
class DetectionCache {
 public:
  static std::string config_key(const hybrid::HybridConfig& c) {
    std::ostringstream k;
    k.precision(17);
    k << "w=" << c.window << ";o=" << c.overlap_ratio << ";t=" << c.nms.iou_threshold << ";e=" << c.nms.prune_epsilon
      << ";m=" << static_cast<int>(c.nms.mode) << ";merge=" << static_cast<int>(c.merge.mode)
      << ";cs=" << c.count_score_threshold;
    return k.str();
  }

  std::optional<hybrid::DetectorPass> find(const std::string& key, const std::string& image) const {
    std::shared_lock lock(mu_);
    auto it = passes_.find({key, image});
    if (it == passes_.end()) return std::nullopt;
    return it->second;
  }

  hybrid::DetectorPass insert(const std::string& key, const std::string& image, hybrid::DetectorPass pass) {
    std::unique_lock lock(mu_);
    auto [it, inserted] = passes_.try_emplace({key, image}, std::move(pass));
    return it->second;
  }

  std::size_t size() const {
    std::shared_lock lock(mu_);
    return passes_.size();
  }

 private:
  mutable std::shared_mutex mu_;
  std::map<std::pair<std::string, std::string>, hybrid::DetectorPass> passes_;
};

inline hybrid::DetectorPass cached_detector_pass(DetectionCache* cache, const Scene& scene,
                                                 const DetectorBackend& det, const hybrid::HybridConfig& cfg) {
  if (!cache) return hybrid::run_detector(scene.image(), det, cfg);
  const std::string key = DetectionCache::config_key(cfg);
  if (auto hit = cache->find(key, scene.id)) return *hit;
  return cache->insert(key, scene.id, hybrid::run_detector(scene.image(), det, cfg));
}

namespace detail {

inline std::size_t pick_best(const std::vector<SweepRow>& rows, bool minimize) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const double a = minimize ? *rows[i].mae : *rows[i].ap;
    const double b = minimize ? *rows[best].mae : *rows[best].ap;
    const bool better = minimize ? a < b : a > b;
    if (better || (a == b && rows[i].value < rows[best].value)) best = i;
  }
  return best;
}

inline void require_values(const std::vector<double>& values) {
  if (values.empty()) fail(ErrorKind::invalid_argument, "sweep needs at least one value");
}

template <typename Fn>
auto with_context(const Scene& scene, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    throw Error(e.kind(), "sweep aborted at image '" + scene.id + "': " + e.what());
  }
}

}  // namespace detail

/// Ground-truth counts are the number of point labels per scene.
inline SweepReport sweep_switch_threshold(const Dataset& data, const DetectorBackend& det, const DensityBackend& den,
                                          const hybrid::HybridConfig& base, const std::vector<double>& thresholds,
                                          const SweepOptions& opts = {}, DetectionCache* cache = nullptr) {
  detail::require_values(thresholds);
  base.validate();
  for (double t : thresholds)
    if (!(t >= 0.0)) fail(ErrorKind::invalid_argument, "switch thresholds must be >= 0");
  if (data.scenes.empty()) fail(ErrorKind::invalid_argument, "sweep dataset is empty");

  SweepReport report;
  report.parameter = Parameter::switch_threshold;
  report.fixed = base;
  report.iou_threshold = opts.iou_threshold;
  const std::size_t n = data.scenes.size();

  std::vector<std::vector<metrics::CountPair>> pairs(thresholds.size(), std::vector<metrics::CountPair>(n));
  if (opts.use_cache) {
    DetectionCache local;
    DetectionCache* c = cache ? cache : &local;
    const double lowest = *std::min_element(thresholds.begin(), thresholds.end());
    parallel_for(n, opts.jobs, [&](std::size_t i) {
      const Scene& s = data.scenes[i];
      detail::with_context(s, [&] {
        const hybrid::DetectorPass pass = cached_detector_pass(c, s, det, base);
        std::optional<double> n2;
        if (hybrid::routes_to_density(pass.n1, lowest)) n2 = hybrid::run_density(s.image(), den);
        for (std::size_t t = 0; t < thresholds.size(); ++t) {
          const auto r = hybrid::route(s.image(), pass, thresholds[t], [&] { return *n2; });
          pairs[t][i] = {r.count, static_cast<double>(s.count())};
        }
        return 0;
      });
    });
  } else {
    for (std::size_t t = 0; t < thresholds.size(); ++t) {
      hybrid::HybridConfig cfg = base;
      cfg.switch_threshold = thresholds[t];
      parallel_for(n, opts.jobs, [&](std::size_t i) {
        const Scene& s = data.scenes[i];
        const auto r = detail::with_context(s, [&] { return hybrid::hybrid_count(s.image(), det, den, cfg); });
        pairs[t][i] = {r.count, static_cast<double>(s.count())};
      });
    }
  }
  for (std::size_t t = 0; t < thresholds.size(); ++t)
    report.rows.push_back({thresholds[t], metrics::mae(pairs[t]), metrics::rmse(pairs[t]), std::nullopt});
  report.best = detail::pick_best(report.rows, true);
  return report;
}

namespace detail {

template <typename Apply>
SweepReport sweep_detection(Parameter param, const Dataset& data, const DetectorBackend& det,
                            const hybrid::HybridConfig& base, const std::vector<double>& values,
                            const SweepOptions& opts, DetectionCache* cache, Apply&& apply) {
  require_values(values);
  if (data.scenes.empty()) fail(ErrorKind::invalid_argument, "sweep dataset is empty");
  SweepReport report;
  report.parameter = param;
  report.fixed = base;
  report.iou_threshold = opts.iou_threshold;
  for (double v : values) {
    hybrid::HybridConfig cfg = base;
    apply(cfg, v);
    cfg.validate();
    std::vector<metrics::ImageEval> evals(data.scenes.size());
    parallel_for(data.scenes.size(), opts.jobs, [&](std::size_t i) {
      const Scene& s = data.scenes[i];
      auto pass = with_context(s, [&] { return cached_detector_pass(opts.use_cache ? cache : nullptr, s, det, cfg); });
      evals[i] = {std::move(pass.detections), s.boxes};
    });
    report.rows.push_back({v, std::nullopt, std::nullopt, metrics::average_precision(evals, opts.iou_threshold)});
  }
  report.best = pick_best(report.rows, false);
  return report;
}

}  // namespace detail

inline SweepReport sweep_window(const Dataset& data, const DetectorBackend& det, const hybrid::HybridConfig& base,
                                const std::vector<double>& windows, const SweepOptions& opts = {},
                                DetectionCache* cache = nullptr) {
  for (double w : windows)
    if (!(w >= 1.0) || w != std::floor(w)) fail(ErrorKind::invalid_argument, "window sizes must be positive integers");
  return detail::sweep_detection(Parameter::window, data, det, base, windows, opts, cache,
                                 [](hybrid::HybridConfig& c, double v) { c.window = static_cast<std::size_t>(v); });
}

inline SweepReport sweep_overlap(const Dataset& data, const DetectorBackend& det, const hybrid::HybridConfig& base,
                                 const std::vector<double>& ratios, const SweepOptions& opts = {},
                                 DetectionCache* cache = nullptr) {
  for (double r : ratios)
    if (!(r >= 0.0 && r < 1.0)) fail(ErrorKind::invalid_argument, "overlap ratios must lie in [0, 1)");
  return detail::sweep_detection(Parameter::overlap, data, det, base, ratios, opts, cache,
                                 [](hybrid::HybridConfig& c, double v) { c.overlap_ratio = v; });
}

}  // namespace hycount::sweeps

#pragma once

// Threshold-switched counting. Every image goes through split-merge
// detection first; N1 is the number of surviving detections scoring at least
// count_score_threshold. Images with N1 < switch_threshold keep N1 as their
// count. Otherwise the density backend is run and its integral (N2) becomes
// the count. The density backend is never called for detector-routed images.

#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "hycount/backend.hpp"
#include "hycount/density.hpp"
#include "hycount/errors.hpp"
#include "hycount/nms.hpp"
#include "hycount/tiling.hpp"

namespace hycount::hybrid {

enum class Branch { detector, density };

inline const char* to_string(Branch b) { return b == Branch::detector ? "detector" : "density"; }

/// Use as switch_threshold to keep every image on the detector branch.
inline constexpr double kNeverSwitch = std::numeric_limits<double>::infinity();

struct HybridConfig {
  double switch_threshold = 165.0;
  double count_score_threshold = 0.25;
  std::size_t window = 256;
  double overlap_ratio = 0.2;
  nms::NmsConfig nms;
  tiling::MergeOptions merge;

  void validate() const {
    if (!(switch_threshold >= 0.0)) fail(ErrorKind::invalid_argument, "switch threshold must be >= 0");
    if (!(count_score_threshold >= 0.0 && count_score_threshold <= 1.0))
      fail(ErrorKind::invalid_argument, "count score threshold must lie in [0, 1]");
    if (window == 0) fail(ErrorKind::invalid_argument, "window must be >= 1");
    if (!(overlap_ratio >= 0.0 && overlap_ratio < 1.0))
      fail(ErrorKind::invalid_argument, "overlap ratio must lie in [0, 1)");
    nms.validate();
  }
};

struct CountResult {
  std::string image;
  double count = 0.0;
  Branch branch = Branch::detector;
  std::size_t n1 = 0;
  std::optional<double> n2;                       // density branch only
  std::optional<std::vector<Detection>> detections;  // detector branch only
};

inline std::size_t count_detections(const std::vector<Detection>& dets, double score_threshold) {
  std::size_t n = 0;
  for (const auto& d : dets)
    if (d.score >= score_threshold) ++n;
  return n;
}

inline bool routes_to_density(std::size_t n1, double switch_threshold) {
  return static_cast<double>(n1) >= switch_threshold;
}

/// Detector-branch output for one image, reusable across switch thresholds.
struct DetectorPass {
  std::vector<Detection> detections;
  std::size_t n1 = 0;
};

inline DetectorPass run_detector(const ImageRef& image, const DetectorBackend& det, const HybridConfig& cfg) {
  DetectorPass pass;
  try {
    const auto plan = tiling::plan_tiles(image.width, image.height, cfg.window, cfg.overlap_ratio);
    pass.detections = tiling::split_merge_detect(image, det, plan, cfg.nms, cfg.merge);
  } catch (const Error& e) {
    throw Error(e.kind(), std::string("detector branch: ") + e.what());
  }
  pass.n1 = count_detections(pass.detections, cfg.count_score_threshold);
  return pass;
}

inline double run_density(const ImageRef& image, const DensityBackend& den) {
  try {
    return density::integrate(estimate_density(den, image));
  } catch (const Error& e) {
    throw Error(e.kind(), std::string("density branch: ") + e.what());
  }
}

/// Routing step on a finished detector pass; `density_count` is only called
/// for density-routed images.
template <typename DensityCount>
CountResult route(const ImageRef& image, DetectorPass pass, double switch_threshold, DensityCount&& density_count) {
  CountResult r;
  r.image = image.id;
  r.n1 = pass.n1;
  if (routes_to_density(pass.n1, switch_threshold)) {
    r.branch = Branch::density;
    r.n2 = density_count();
    r.count = *r.n2;
  } else {
    r.branch = Branch::detector;
    r.count = static_cast<double>(pass.n1);
    r.detections = std::move(pass.detections);
  }
  return r;
}

inline CountResult hybrid_count(const ImageRef& image, const DetectorBackend& det, const DensityBackend& den,
                                const HybridConfig& cfg) {
  cfg.validate();
  return route(image, run_detector(image, det, cfg), cfg.switch_threshold,
               [&] { return run_density(image, den); });
}

}  // namespace hycount::hybrid

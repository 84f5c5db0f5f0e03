#pragma once

// Split-merge detection: cover the image with overlapping square windows,
// detect per window, move the boxes back to image coordinates and resolve
// duplicates with one global NMS pass.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <sstream>
#include <vector>

#include "hycount/backend.hpp"
#include "hycount/errors.hpp"
#include "hycount/geometry.hpp"
#include "hycount/nms.hpp"
#include "hycount/parallel.hpp"

namespace hycount::tiling {

struct TilePlan {
  std::size_t image_width = 0;
  std::size_t image_height = 0;
  std::size_t window = 0;
  double overlap_ratio = 0.0;
  std::size_t stride = 0;
  std::size_t columns = 0;
  std::size_t rows = 0;
  std::vector<BBox> tiles;  // row-major
};

/// round-half-up(window * (1 - overlap)), at least 1.
inline std::size_t stride_for(std::size_t window, double overlap_ratio) {
  const double s = std::floor(static_cast<double>(window) * (1.0 - overlap_ratio) + 0.5);
  return std::max<std::size_t>(1, static_cast<std::size_t>(s));
}

/// Origins 0, s, 2s, ...; the first window that would cross the far edge is
/// pulled back flush with it and ends the sequence.
inline std::vector<std::size_t> axis_origins(std::size_t extent, std::size_t window, std::size_t stride) {
  if (extent <= window) return {0};
  std::vector<std::size_t> origins;
  for (std::size_t o = 0;; o += stride) {
    if (o + window >= extent) {
      origins.push_back(extent - window);
      break;
    }
    origins.push_back(o);
  }
  return origins;
}

inline TilePlan plan_tiles(std::size_t width, std::size_t height, std::size_t window, double overlap_ratio) {
  if (window == 0) fail(ErrorKind::invalid_argument, "tile window must be >= 1");
  if (!(overlap_ratio >= 0.0 && overlap_ratio < 1.0))
    fail(ErrorKind::invalid_argument, "overlap ratio must lie in [0, 1)");
  if (width == 0 || height == 0) fail(ErrorKind::invalid_argument, "image dimensions must be >= 1");

  TilePlan plan;
  plan.image_width = width;
  plan.image_height = height;
  plan.window = window;
  plan.overlap_ratio = overlap_ratio;
  plan.stride = stride_for(window, overlap_ratio);
  const auto xs = axis_origins(width, window, plan.stride);
  const auto ys = axis_origins(height, window, plan.stride);
  plan.columns = xs.size();
  plan.rows = ys.size();
  const double tw = static_cast<double>(std::min(window, width));
  const double th = static_cast<double>(std::min(window, height));
  plan.tiles.reserve(xs.size() * ys.size());
  for (std::size_t y : ys)
    for (std::size_t x : xs) {
      const auto fx = static_cast<double>(x);
      const auto fy = static_cast<double>(y);
      plan.tiles.push_back({fx, fy, fx + tw, fy + th});
    }
  return plan;
}

inline std::vector<Detection> remap_to_global(const std::vector<Detection>& dets, const BBox& tile) {
  std::vector<Detection> out;
  out.reserve(dets.size());
  for (const auto& d : dets) out.push_back({translate(d.box, tile.x_min, tile.y_min), d.score});
  return out;
}

struct ClippedBox {
  BBox box;           // tile-local
  double visibility;  // clipped area / original area
};

/// Ground truth as seen from inside one tile. Boxes that only touch the tile
/// border (zero-area intersection) are omitted.
inline std::vector<ClippedBox> clip_ground_truth(const std::vector<BBox>& gt, const BBox& tile) {
  std::vector<ClippedBox> out;
  for (const auto& g : gt) {
    const auto c = clip(g, tile);
    if (!c) continue;
    const double area = g.area();
    double vis;
    if (area > 0.0) {
      if (c->area() <= 0.0) continue;
      vis = c->area() / area;
    } else {
      vis = 1.0;
    }
    out.push_back({translate(*c, -tile.x_min, -tile.y_min), std::min(vis, 1.0)});
  }
  return out;
}

enum class MergeMode {
  global_nms,   // concatenate every tile and run one NMS pass
  concatenate,  // concatenate only; duplicates across tiles are kept
};

struct MergeOptions {
  MergeMode mode = MergeMode::global_nms;
  std::size_t jobs = 1;
};

inline std::vector<Detection> split_merge_detect(const ImageRef& image, const DetectorBackend& detector,
                                                 const TilePlan& plan, const nms::NmsConfig& nms_cfg,
                                                 const MergeOptions& opts = {}) {
  nms_cfg.validate();
  if (plan.image_width != image.width || plan.image_height != image.height)
    fail(ErrorKind::invalid_argument, "tile plan was built for a different image size than '" + image.id + "'");

  const Capabilities caps = detector.capabilities();
  // A backend that cannot take crops sees the whole image as one tile.
  const std::vector<BBox> tiles = caps.accepts_crops ? plan.tiles : std::vector<BBox>{image.bounds()};

  std::vector<std::vector<Detection>> per_tile(tiles.size());
  parallel_for(tiles.size(), caps.concurrent_safe ? opts.jobs : 1, [&](std::size_t t) {
    const BBox& tile = tiles[t];
    try {
      if (caps.accepts_crops) {
        per_tile[t] = remap_to_global(detect(detector, image, tile), tile);
      } else {
        per_tile[t] = detect(detector, image, std::nullopt);
      }
    } catch (const Error& e) {
      std::ostringstream msg;
      msg << "image '" << image.id << "' tile " << t << " at " << tile << ": " << e.what();
      throw Error(e.kind(), msg.str());
    } catch (const std::exception& e) {
      std::ostringstream msg;
      msg << "image '" << image.id << "' tile " << t << " at " << tile << ": " << e.what();
      throw Error(ErrorKind::backend, msg.str());
    }
  });

  struct Keyed {
    Detection det;
    std::size_t tile;
    std::size_t local;
  };
  std::vector<Keyed> all;
  for (std::size_t t = 0; t < per_tile.size(); ++t)
    for (std::size_t i = 0; i < per_tile[t].size(); ++i) all.push_back({per_tile[t][i], t, i});
  std::sort(all.begin(), all.end(), [](const Keyed& a, const Keyed& b) {
    if (a.det.score != b.det.score) return a.det.score > b.det.score;
    if (a.tile != b.tile) return a.tile < b.tile;
    return a.local < b.local;
  });
  std::vector<Detection> merged;
  merged.reserve(all.size());
  for (const auto& k : all) merged.push_back(k.det);
  if (opts.mode == MergeMode::concatenate) return merged;
  return nms::suppress(merged, nms_cfg);
}

}  // namespace hycount::tiling

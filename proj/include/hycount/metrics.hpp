#pragma once

// Detection and counting metrics.
//
// Matching is greedy: predictions are visited by descending score (input
// order on ties) and each claims the still-unmatched ground truth box with
// the highest IoU, provided that IoU reaches the threshold. AP is the exact
// area under the precision-recall curve after the usual monotone envelope
// (precision at recall r is the best precision at any recall >= r). Curve
// points are taken at distinct score cut-offs, so tied scores enter together.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hycount/errors.hpp"
#include "hycount/geometry.hpp"

namespace hycount::metrics {

struct Matching {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;  // (prediction, gt)
  std::vector<std::size_t> unmatched_predictions;
  std::vector<std::size_t> unmatched_gts;
  double iou_threshold = 0.5;

  std::size_t tp() const { return pairs.size(); }
  std::size_t fp() const { return unmatched_predictions.size(); }
  std::size_t fn() const { return unmatched_gts.size(); }
};

/// Prediction indices by descending score, stable on ties.
inline std::vector<std::size_t> score_order(const std::vector<Detection>& preds) {
  std::vector<std::size_t> order(preds.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return preds[a].score > preds[b].score; });
  return order;
}

inline Matching match_detections(const std::vector<Detection>& preds, const std::vector<BBox>& gts,
                                 double iou_threshold = 0.5) {
  if (!(iou_threshold > 0.0 && iou_threshold <= 1.0))
    fail(ErrorKind::invalid_argument, "matching IoU threshold must lie in (0, 1]");
  Matching m;
  m.iou_threshold = iou_threshold;
  std::vector<bool> taken(gts.size(), false);
  std::vector<bool> matched(preds.size(), false);
  for (std::size_t p : score_order(preds)) {
    std::size_t best = gts.size();
    double best_iou = -1.0;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (taken[g]) continue;
      const double v = iou(preds[p].box, gts[g]);
      if (v >= iou_threshold && v > best_iou) {
        best = g;
        best_iou = v;
      }
    }
    if (best < gts.size()) {
      taken[best] = true;
      matched[p] = true;
      m.pairs.emplace_back(p, best);
    }
  }
  for (std::size_t p = 0; p < preds.size(); ++p)
    if (!matched[p]) m.unmatched_predictions.push_back(p);
  for (std::size_t g = 0; g < gts.size(); ++g)
    if (!taken[g]) m.unmatched_gts.push_back(g);
  return m;
}

// Zero denominators give 0.
inline double precision(std::size_t tp, std::size_t fp) {
  return tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
}

inline double recall(std::size_t tp, std::size_t fn) {
  return tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
}

struct ImageEval {
  std::vector<Detection> predictions;
  std::vector<BBox> ground_truth;
};

struct PrPoint {
  double score = 0.0;  // cut-off: predictions scoring >= this are kept
  double recall = 0.0;
  double precision = 0.0;
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
};

struct PrCurve {
  std::vector<PrPoint> points;
  std::size_t total_gt = 0;
};

inline PrCurve pr_curve(const std::vector<ImageEval>& images, double iou_threshold = 0.5) {
  struct Ranked {
    double score;
    bool tp;
  };
  std::vector<Ranked> ranked;
  PrCurve curve;
  for (const auto& im : images) {
    curve.total_gt += im.ground_truth.size();
    const Matching m = match_detections(im.predictions, im.ground_truth, iou_threshold);
    std::vector<bool> is_tp(im.predictions.size(), false);
    for (const auto& [p, g] : m.pairs) is_tp[p] = true;
    for (std::size_t p = 0; p < im.predictions.size(); ++p) ranked.push_back({im.predictions[p].score, is_tp[p]});
  }
  std::stable_sort(ranked.begin(), ranked.end(), [](const Ranked& a, const Ranked& b) { return a.score > b.score; });

  std::size_t tp = 0;
  std::size_t fp = 0;
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    (ranked[i].tp ? tp : fp) += 1;
    if (i + 1 < ranked.size() && ranked[i + 1].score == ranked[i].score) continue;
    const std::size_t fn = curve.total_gt - tp;
    curve.points.push_back({ranked[i].score, recall(tp, fn), precision(tp, fp), tp, fp, fn});
  }
  return curve;
}

/// All-point interpolated area under the enveloped curve.
inline double average_precision(const PrCurve& curve) {
  if (curve.total_gt == 0) fail(ErrorKind::invalid_argument, "average precision is undefined without ground truth");
  const auto& pts = curve.points;
  std::vector<double> envelope(pts.size());
  double best = 0.0;
  for (std::size_t i = pts.size(); i-- > 0;) {
    best = std::max(best, pts[i].precision);
    envelope[i] = best;
  }
  double ap = 0.0;
  double prev_recall = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    ap += (pts[i].recall - prev_recall) * envelope[i];
    prev_recall = pts[i].recall;
  }
  return ap;
}

inline double average_precision(const std::vector<ImageEval>& images, double iou_threshold = 0.5) {
  return average_precision(pr_curve(images, iou_threshold));
}

struct CountPair {
  double predicted = 0.0;
  double truth = 0.0;
};

inline double mae(const std::vector<CountPair>& pairs) {
  if (pairs.empty()) fail(ErrorKind::invalid_argument, "MAE of an empty list is undefined");
  double sum = 0.0;
  for (const auto& p : pairs) sum += std::abs(p.predicted - p.truth);
  return sum / static_cast<double>(pairs.size());
}

inline double rmse(const std::vector<CountPair>& pairs) {
  if (pairs.empty()) fail(ErrorKind::invalid_argument, "RMSE of an empty list is undefined");
  double sum = 0.0;
  for (const auto& p : pairs) sum += (p.predicted - p.truth) * (p.predicted - p.truth);
  return std::sqrt(sum / static_cast<double>(pairs.size()));
}

struct ConfusionRow {
  std::string image;
  bool applicable = true;  // false for density-branch images (no boxes)
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
};

struct ConfusionReport {
  std::vector<ConfusionRow> rows;
  ConfusionRow totals{"total"};
};

struct ImageMatching {
  std::string image;
  std::optional<Matching> matching;  // nullopt: image counted by the density branch
};

inline ConfusionReport confusion_report(const std::vector<ImageMatching>& images) {
  ConfusionReport report;
  for (const auto& im : images) {
    ConfusionRow row{im.image};
    if (im.matching) {
      row.tp = im.matching->tp();
      row.fp = im.matching->fp();
      row.fn = im.matching->fn();
      report.totals.tp += row.tp;
      report.totals.fp += row.fp;
      report.totals.fn += row.fn;
    } else {
      row.applicable = false;
    }
    report.rows.push_back(row);
  }
  return report;
}

}  // namespace hycount::metrics

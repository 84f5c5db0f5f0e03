#pragma once

// Greedy non-maximum suppression over scored detections.
//
// Both variants repeatedly pick the highest-scoring remaining candidate A,
// emit it, and compare every other candidate b against it. When
// iou(A, b) >= iou_threshold, hard mode deletes b and soft mode rescales its
// score to score * (1 - iou(A, b)). Candidates below iou_threshold are left
// untouched. Equal scores are resolved in favour of the lower input index.

#include <cstddef>
#include <vector>

#include "hycount/errors.hpp"
#include "hycount/geometry.hpp"

namespace hycount::nms {

enum class Mode { hard, soft_linear };

struct NmsConfig {
  double iou_threshold = 0.5;
  // Soft mode drops any candidate whose score is below this floor.
  double prune_epsilon = 0.001;
  Mode mode = Mode::soft_linear;

  void validate() const {
    if (!(iou_threshold >= 0.0 && iou_threshold <= 1.0))
      fail(ErrorKind::invalid_argument, "nms iou_threshold must lie in [0, 1]");
    if (!(prune_epsilon >= 0.0 && prune_epsilon < 1.0))
      fail(ErrorKind::invalid_argument, "nms prune_epsilon must lie in [0, 1)");
  }
};

namespace detail {

struct Candidate {
  Detection det;
  std::size_t index;
  bool alive;
};

inline std::vector<Candidate> make_candidates(const std::vector<Detection>& dets) {
  std::vector<Candidate> cands;
  cands.reserve(dets.size());
  for (std::size_t i = 0; i < dets.size(); ++i) cands.push_back({dets[i], i, true});
  return cands;
}

// Highest live score, lowest index on ties. Returns cands.size() when none.
inline std::size_t select_best(const std::vector<Candidate>& cands) {
  std::size_t best = cands.size();
  for (std::size_t i = 0; i < cands.size(); ++i) {
    if (!cands[i].alive) continue;
    if (best == cands.size() || cands[i].det.score > cands[best].det.score) best = i;
  }
  return best;
}

template <typename Decay>
std::vector<Detection> greedy(const std::vector<Detection>& dets, double iou_threshold, Decay&& decay) {
  auto cands = make_candidates(dets);
  std::vector<Detection> out;
  for (std::size_t picked = select_best(cands); picked < cands.size(); picked = select_best(cands)) {
    Candidate& a = cands[picked];
    a.alive = false;
    out.push_back(a.det);
    for (Candidate& b : cands) {
      if (!b.alive) continue;
      const double overlap = iou(a.det.box, b.det.box);
      if (overlap >= iou_threshold) decay(b, overlap);
    }
  }
  return out;
}

}  // namespace detail

inline std::vector<Detection> hard_nms(const std::vector<Detection>& dets, const NmsConfig& cfg) {
  cfg.validate();
  return detail::greedy(dets, cfg.iou_threshold,
                        [](detail::Candidate& b, double) { b.alive = false; });
}

inline std::vector<Detection> soft_nms(const std::vector<Detection>& dets, const NmsConfig& cfg) {
  cfg.validate();
  const double eps = cfg.prune_epsilon;
  // Inputs already under the floor never become candidates. Pruning every
  // sub-floor score, not only decayed ones, makes a higher floor yield a
  // prefix of the lower-floor output.
  std::vector<Detection> kept;
  kept.reserve(dets.size());
  for (const auto& d : dets)
    if (d.score >= eps) kept.push_back(d);
  return detail::greedy(kept, cfg.iou_threshold, [eps](detail::Candidate& b, double overlap) {
    b.det.score *= (1.0 - overlap);
    if (b.det.score < eps) b.alive = false;
  });
}

/// Dispatches on cfg.mode.
inline std::vector<Detection> suppress(const std::vector<Detection>& dets, const NmsConfig& cfg) {
  return cfg.mode == Mode::hard ? hard_nms(dets, cfg) : soft_nms(dets, cfg);
}

}  // namespace hycount::nms

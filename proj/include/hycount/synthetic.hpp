#pragma once

// Seeded stand-ins for the detection and density networks. They turn ground
// truth into predictions with a small declared error model:
//
//   detector  a ground-truth box is dropped when less than
//             fragment_min_visibility of it lies inside the crop; otherwise it
//             is found with probability
//               base_detect_prob * exp(-crowd_decay * neighbours)
//             where neighbours counts other centres within neighbour_radius.
//             Found boxes get Gaussian corner jitter and a score drawn
//             uniformly from [0.3, 1]. Poisson(fp_rate * crop_area /
//             image_area) spurious boxes are added per call.
//   density   the ground-truth map rescaled to
//               N + overpred_offset * max(0, 1 - N / saturation) + Normal(0, noise_sd)
//             clamped at zero.
//
// Every call draws from an RNG seeded by (seed, image id, crop origin), so
// results do not depend on call order or threading.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "hycount/backend.hpp"
#include "hycount/density.hpp"
#include "hycount/errors.hpp"
#include "hycount/scene.hpp"

namespace hycount::synthetic {

struct SyntheticErrorModel {
  double base_detect_prob = 0.95;
  double crowd_decay = 0.02;
  // <= 0 selects 2 x the median ground-truth box side of the scene.
  double neighbor_radius = 0.0;
  double fragment_min_visibility = 0.5;
  double fp_rate = 0.5;
  double density_overpred_offset = 10.0;
  double density_saturation = 200.0;
  double noise_sd = 1.0;
  std::uint64_t seed = 0;

  void validate() const {
    auto check = [](bool ok, const char* what) {
      if (!ok) fail(ErrorKind::invalid_argument, std::string("synthetic error model: ") + what);
    };
    check(base_detect_prob >= 0.0 && base_detect_prob <= 1.0, "base_detect_prob must lie in [0, 1]");
    check(crowd_decay >= 0.0 && std::isfinite(crowd_decay), "crowd_decay must be finite and >= 0");
    check(std::isfinite(neighbor_radius), "neighbor_radius must be finite");
    check(fragment_min_visibility >= 0.0 && fragment_min_visibility <= 1.0,
          "fragment_min_visibility must lie in [0, 1]");
    check(fp_rate >= 0.0 && std::isfinite(fp_rate), "fp_rate must be finite and >= 0");
    check(density_overpred_offset >= 0.0 && std::isfinite(density_overpred_offset),
          "density_overpred_offset must be finite and >= 0");
    check(density_saturation > 0.0 && std::isfinite(density_saturation), "density_saturation must be > 0");
    check(noise_sd >= 0.0 && std::isfinite(noise_sd), "noise_sd must be finite and >= 0");
  }

  /// base 1, no crowding, no false positives, no noise.
  static SyntheticErrorModel noiseless() {
    SyntheticErrorModel m;
    m.base_detect_prob = 1.0;
    m.crowd_decay = 0.0;
    m.fragment_min_visibility = 0.0;
    m.fp_rate = 0.0;
    m.density_overpred_offset = 0.0;
    m.noise_sd = 0.0;
    return m;
  }
};

inline void to_json(nlohmann::json& j, const SyntheticErrorModel& m) {
  j = {{"base_detect_prob", m.base_detect_prob},
       {"crowd_decay", m.crowd_decay},
       {"neighbor_radius", m.neighbor_radius},
       {"fragment_min_visibility", m.fragment_min_visibility},
       {"fp_rate", m.fp_rate},
       {"density_overpred_offset", m.density_overpred_offset},
       {"density_saturation", m.density_saturation},
       {"noise_sd", m.noise_sd},
       {"seed", m.seed}};
}

/// Missing keys keep their defaults; unknown keys are rejected.
inline void from_json(const nlohmann::json& j, SyntheticErrorModel& m) {
  if (!j.is_object()) fail(ErrorKind::parse, "synthetic parameters must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    auto num = [&]() {
      if (!value.is_number()) fail(ErrorKind::parse, "synthetic parameter '" + key + "' must be a number");
      return value.get<double>();
    };
    if (key == "base_detect_prob") m.base_detect_prob = num();
    else if (key == "crowd_decay") m.crowd_decay = num();
    else if (key == "neighbor_radius") m.neighbor_radius = num();
    else if (key == "fragment_min_visibility") m.fragment_min_visibility = num();
    else if (key == "fp_rate") m.fp_rate = num();
    else if (key == "density_overpred_offset") m.density_overpred_offset = num();
    else if (key == "density_saturation") m.density_saturation = num();
    else if (key == "noise_sd") m.noise_sd = num();
    else if (key == "seed") {
      if (!value.is_number_unsigned()) fail(ErrorKind::parse, "synthetic parameter 'seed' must be an unsigned integer");
      m.seed = value.get<std::uint64_t>();
    } else {
      fail(ErrorKind::parse, "unknown synthetic parameter '" + key + "'");
    }
  }
}

inline double box_side(const BBox& b) { return std::sqrt(std::max(0.0, b.area())); }

inline double median_side(const std::vector<BBox>& boxes) {
  if (boxes.empty()) return 0.0;
  std::vector<double> sides;
  sides.reserve(boxes.size());
  for (const auto& b : boxes) sides.push_back(box_side(b));
  std::sort(sides.begin(), sides.end());
  const std::size_t n = sides.size();
  return n % 2 ? sides[n / 2] : 0.5 * (sides[n / 2 - 1] + sides[n / 2]);
}

/// Per-scene quantities shared by every crop of the same image.
struct SceneContext {
  double median_side = 0.0;
  double neighbor_radius = 0.0;
  std::vector<std::size_t> neighbors;  // per ground-truth box
};

inline SceneContext make_context(const Scene& scene, const SyntheticErrorModel& m) {
  SceneContext ctx;
  ctx.median_side = median_side(scene.boxes);
  ctx.neighbor_radius = m.neighbor_radius > 0.0 ? m.neighbor_radius : 2.0 * ctx.median_side;
  const double r2 = ctx.neighbor_radius * ctx.neighbor_radius;
  const std::size_t n = scene.boxes.size();
  ctx.neighbors.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const Point a = scene.boxes[i].center();
    for (std::size_t j = i + 1; j < n; ++j) {
      const Point b = scene.boxes[j].center();
      const double dx = a.x - b.x;
      const double dy = a.y - b.y;
      if (dx * dx + dy * dy <= r2) {
        ++ctx.neighbors[i];
        ++ctx.neighbors[j];
      }
    }
  }
  return ctx;
}

inline std::mt19937_64 call_rng(std::uint64_t seed, const std::string& id, std::uint64_t salt, double ox = 0.0,
                                double oy = 0.0) {
  std::uint64_t h = hash_combine(mix64(seed), salt);
  h = hash_string(h, id);
  h = hash_combine(h, static_cast<std::uint64_t>(std::llround(ox * 16.0)));
  h = hash_combine(h, static_cast<std::uint64_t>(std::llround(oy * 16.0)));
  return std::mt19937_64(h);
}

inline constexpr std::uint64_t kDetectSalt = 0x6465746563740001ULL;
inline constexpr std::uint64_t kDensitySalt = 0x64656e7369740002ULL;

inline std::vector<Detection> synthetic_detect(const Scene& scene, const SyntheticErrorModel& m,
                                               const std::optional<BBox>& tile, const SceneContext& ctx) {
  const BBox crop = tile.value_or(BBox{0.0, 0.0, static_cast<double>(scene.width), static_cast<double>(scene.height)});
  const double cw = crop.width();
  const double ch = crop.height();
  auto rng = call_rng(m.seed, scene.id, kDetectSalt, crop.x_min, crop.y_min);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> score_dist(0.3, 1.0);
  std::normal_distribution<double> jitter(0.0, 1.0);

  std::vector<Detection> out;
  for (std::size_t i = 0; i < scene.boxes.size(); ++i) {
    const BBox& g = scene.boxes[i];
    const auto c = clip(g, crop);
    if (!c) continue;
    const double area = g.area();
    if (area > 0.0 && c->area() <= 0.0) continue;
    const double vis = area > 0.0 ? c->area() / area : 1.0;
    if (vis < m.fragment_min_visibility) continue;

    const double p = m.base_detect_prob * std::exp(-m.crowd_decay * static_cast<double>(ctx.neighbors[i]));
    const double u = unit(rng);
    const double score = score_dist(rng);
    if (!(u < p)) continue;

    BBox b = translate(*c, -crop.x_min, -crop.y_min);
    if (m.noise_sd > 0.0) {
      b.x_min += m.noise_sd * jitter(rng);
      b.y_min += m.noise_sd * jitter(rng);
      b.x_max += m.noise_sd * jitter(rng);
      b.y_max += m.noise_sd * jitter(rng);
      if (b.x_min > b.x_max) std::swap(b.x_min, b.x_max);
      if (b.y_min > b.y_max) std::swap(b.y_min, b.y_max);
      b.x_min = std::clamp(b.x_min, 0.0, cw);
      b.x_max = std::clamp(b.x_max, 0.0, cw);
      b.y_min = std::clamp(b.y_min, 0.0, ch);
      b.y_max = std::clamp(b.y_max, 0.0, ch);
    }
    out.push_back({b, score});
  }

  const double image_area = static_cast<double>(scene.width) * static_cast<double>(scene.height);
  const double lambda = image_area > 0.0 ? m.fp_rate * (cw * ch) / image_area : 0.0;
  if (lambda > 0.0) {
    std::poisson_distribution<int> fp_count(lambda);
    const int k = fp_count(rng);
    const double base = ctx.median_side > 0.0 ? ctx.median_side : 16.0;
    std::uniform_real_distribution<double> size_scale(0.5, 1.5);
    for (int f = 0; f < k; ++f) {
      const double w = std::min(cw, base * size_scale(rng));
      const double h = std::min(ch, base * size_scale(rng));
      const double x = unit(rng) * (cw - w);
      const double y = unit(rng) * (ch - h);
      out.push_back({{x, y, x + w, y + h}, score_dist(rng)});
    }
  }
  return out;
}

inline std::vector<Detection> synthetic_detect(const Scene& scene, const SyntheticErrorModel& m,
                                               const std::optional<BBox>& tile = std::nullopt) {
  m.validate();
  return synthetic_detect(scene, m, tile, make_context(scene, m));
}

/// Count the density stand-in reports for a scene of n objects.
inline double synthetic_density_count(const Scene& scene, const SyntheticErrorModel& m) {
  const double n = static_cast<double>(scene.count());
  double target = n + m.density_overpred_offset * std::max(0.0, 1.0 - n / m.density_saturation);
  if (m.noise_sd > 0.0) {
    auto rng = call_rng(m.seed, scene.id, kDensitySalt);
    std::normal_distribution<double> noise(0.0, m.noise_sd);
    target += noise(rng);
  }
  return std::max(0.0, target);
}

inline density::DensityMap synthetic_density(const Scene& scene, const SyntheticErrorModel& m,
                                             const density::KernelConfig& kernel = {}) {
  m.validate();
  density::DensityMap map = density::generate_density_map(scene.points, scene.width, scene.height, kernel);
  density::rescale_to(map, synthetic_density_count(scene, m));
  return map;
}

class SyntheticDetector final : public DetectorBackend {
 public:
  SyntheticDetector(std::shared_ptr<const Dataset> dataset, SyntheticErrorModel model)
      : dataset_(std::move(dataset)), model_(model) {
    model_.validate();
    for (std::size_t i = 0; i < dataset_->scenes.size(); ++i) {
      const Scene& s = dataset_->scenes[i];
      contexts_.emplace(s.id, Entry{&s, make_context(s, model_)});
    }
  }

  Capabilities capabilities() const override { return {true, true}; }

  std::vector<Detection> detect(const ImageRef& image, const std::optional<BBox>& crop) const override {
    auto it = contexts_.find(image.id);
    if (it == contexts_.end()) fail(ErrorKind::backend, "synthetic detector has no scene '" + image.id + "'");
    return synthetic_detect(*it->second.scene, model_, crop, it->second.ctx);
  }

  const SyntheticErrorModel& model() const { return model_; }

 private:
  struct Entry {
    const Scene* scene;
    SceneContext ctx;
  };
  std::shared_ptr<const Dataset> dataset_;
  SyntheticErrorModel model_;
  std::map<std::string, Entry> contexts_;
};

class SyntheticDensity final : public DensityBackend {
 public:
  SyntheticDensity(std::shared_ptr<const Dataset> dataset, SyntheticErrorModel model,
                   std::size_t output_scale = 8, density::KernelConfig kernel = {})
      : dataset_(std::move(dataset)), model_(model), scale_(output_scale), kernel_(kernel) {
    model_.validate();
    kernel_.validate();
    if (scale_ == 0) fail(ErrorKind::invalid_argument, "output scale must be >= 1");
    for (const auto& s : dataset_->scenes) scenes_.emplace(s.id, &s);
  }

  Capabilities capabilities() const override { return {true, true}; }
  std::size_t output_scale() const override { return scale_; }

  density::DensityMap estimate_native(const ImageRef& image) const override {
    auto it = scenes_.find(image.id);
    if (it == scenes_.end()) fail(ErrorKind::backend, "synthetic density has no scene '" + image.id + "'");
    return density::sum_pool(synthetic_density(*it->second, model_, kernel_), scale_);
  }

 private:
  std::shared_ptr<const Dataset> dataset_;
  SyntheticErrorModel model_;
  std::size_t scale_;
  density::KernelConfig kernel_;
  std::map<std::string, const Scene*> scenes_;
};

}  // namespace hycount::synthetic

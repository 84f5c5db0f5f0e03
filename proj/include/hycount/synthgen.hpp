#pragma once

// Seeded annotation-only scene generator.
//
// Box sizes follow a small/medium/large mix using the COCO area cut-offs
// (small < 32^2 <= medium < 96^2 <= large). Positions are either uniform or
// drawn around a few Gaussian cluster centres. Each new box must keep its IoU
// with every placed box at or below max_overlap; a box that cannot be placed
// within the retry budget makes the spec infeasible.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "hycount/annotations.hpp"
#include "hycount/errors.hpp"
#include "hycount/geometry.hpp"
#include "hycount/scene.hpp"

namespace hycount::synthgen {

enum class SizeClass { small, medium, large };

inline constexpr double kSmallAreaMax = 32.0 * 32.0;
inline constexpr double kMediumAreaMax = 96.0 * 96.0;

inline SizeClass size_class(const BBox& b) {
  const double a = b.area();
  if (a < kSmallAreaMax) return SizeClass::small;
  if (a < kMediumAreaMax) return SizeClass::medium;
  return SizeClass::large;
}

struct CountBin {
  std::size_t lo = 0;
  std::size_t hi = 0;  // inclusive
  double weight = 1.0;
};

struct SizeMix {
  double small = 0.7289;
  double medium = 0.2707;
  double large = 0.0004;
};

/// Square-root-of-area ranges per class; aspect ratios vary around 1.
struct SideRange {
  double lo;
  double hi;
};

struct SceneSpec {
  std::size_t width = 640;
  std::size_t height = 640;
  std::vector<CountBin> counts{{1, 50, 1.0}};
  SizeMix size_mix;
  SideRange small_side{10.0, 32.0};
  SideRange medium_side{32.0, 56.0};
  SideRange large_side{96.0, 128.0};
  double max_aspect = 1.33;
  double clustered_fraction = 0.3;
  std::size_t cluster_count = 3;
  double cluster_sigma = 40.0;
  double max_overlap = 0.3;  // IoU
  std::size_t retry_budget = 1000;
  DensityLevel density_level = DensityLevel::normal;

  void validate() const {
    auto check = [](bool ok, const std::string& what) {
      if (!ok) fail(ErrorKind::invalid_argument, "scene spec: " + what);
    };
    check(width > 0 && height > 0, "image size must be positive");
    check(!counts.empty(), "count distribution is empty");
    double total = 0.0;
    for (const auto& b : counts) {
      check(b.lo <= b.hi, "count bin has lo > hi");
      check(b.weight >= 0.0 && std::isfinite(b.weight), "count bin weight must be >= 0");
      total += b.weight;
    }
    check(total > 0.0, "count bin weights sum to zero");
    const double mix = size_mix.small + size_mix.medium + size_mix.large;
    check(size_mix.small >= 0 && size_mix.medium >= 0 && size_mix.large >= 0, "size mix fractions must be >= 0");
    check(std::abs(mix - 1.0) < 1e-9, "size mix fractions must sum to 1");
    for (const SideRange& r : {small_side, medium_side, large_side}) check(r.lo > 0 && r.lo < r.hi, "bad side range");
    check(max_aspect >= 1.0, "max_aspect must be >= 1");
    check(clustered_fraction >= 0.0 && clustered_fraction <= 1.0, "clustered_fraction must lie in [0, 1]");
    check(cluster_sigma > 0.0, "cluster_sigma must be positive");
    check(max_overlap >= 0.0 && max_overlap <= 1.0, "max_overlap must lie in [0, 1]");
    check(retry_budget > 0, "retry budget must be positive");
  }
};

/// Normal-density default: 1 to 50 objects, mostly uniform.
inline SceneSpec normal_spec() { return {}; }

/// High-density default: 150 to 300 objects, mostly clustered.
inline SceneSpec high_density_spec() {
  SceneSpec s;
  s.counts = {{150, 300, 1.0}};
  s.clustered_fraction = 0.6;
  s.cluster_count = 4;
  s.cluster_sigma = 70.0;
  s.max_overlap = 0.3;
  s.density_level = DensityLevel::high;
  return s;
}

/// Probability that a count drawn from `bins` is <= x.
inline double count_cdf(const std::vector<CountBin>& bins, double x) {
  double total = 0.0;
  double below = 0.0;
  for (const auto& b : bins) {
    total += b.weight;
    const double n = static_cast<double>(b.hi - b.lo + 1);
    const double k = std::clamp(std::floor(x) - static_cast<double>(b.lo) + 1.0, 0.0, n);
    below += b.weight * k / n;
  }
  return below / total;
}

namespace detail {

inline std::size_t draw_count(const SceneSpec& spec, std::mt19937_64& rng) {
  std::vector<double> w;
  for (const auto& b : spec.counts) w.push_back(b.weight);
  std::discrete_distribution<std::size_t> pick(w.begin(), w.end());
  const CountBin& bin = spec.counts[pick(rng)];
  return std::uniform_int_distribution<std::size_t>(bin.lo, bin.hi)(rng);
}

// Integer width/height whose area falls in the requested class.
inline std::pair<double, double> draw_size(const SceneSpec& spec, SizeClass cls, std::mt19937_64& rng) {
  const SideRange r = cls == SizeClass::small ? spec.small_side
                      : cls == SizeClass::medium ? spec.medium_side
                                                 : spec.large_side;
  std::uniform_real_distribution<double> side(r.lo, r.hi);
  std::uniform_real_distribution<double> log_aspect(-std::log(spec.max_aspect), std::log(spec.max_aspect));
  for (int attempt = 0; attempt < 64; ++attempt) {
    const double s = side(rng);
    const double a = std::sqrt(std::exp(log_aspect(rng)));
    const double w = std::max(1.0, std::round(s * a));
    const double h = std::max(1.0, std::round(s / a));
    if (w > static_cast<double>(spec.width) || h > static_cast<double>(spec.height)) continue;
    if (size_class({0, 0, w, h}) == cls) return {w, h};
  }
  fail(ErrorKind::infeasible_spec, "cannot draw a box of the requested size class for this image size");
}

}  // namespace detail

inline Scene generate_scene(const SceneSpec& spec, std::uint64_t seed, std::string id = {}) {
  spec.validate();
  std::mt19937_64 rng(hash_combine(mix64(seed), 0x7363656e65ULL));
  Scene scene;
  scene.id = id.empty() ? "scene_" + std::to_string(seed) : std::move(id);
  scene.width = spec.width;
  scene.height = spec.height;
  scene.density_level = spec.density_level;

  const std::size_t n = detail::draw_count(spec, rng);
  const double W = static_cast<double>(spec.width);
  const double H = static_cast<double>(spec.height);

  std::vector<Point> centres;
  std::uniform_real_distribution<double> ux(0.0, W);
  std::uniform_real_distribution<double> uy(0.0, H);
  for (std::size_t c = 0; c < std::max<std::size_t>(1, spec.cluster_count); ++c) centres.push_back({ux(rng), uy(rng)});

  std::discrete_distribution<int> cls_dist({spec.size_mix.small, spec.size_mix.medium, spec.size_mix.large});
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> offset(0.0, spec.cluster_sigma);
  std::uniform_int_distribution<std::size_t> pick_centre(0, centres.size() - 1);

  for (std::size_t i = 0; i < n; ++i) {
    const auto cls = static_cast<SizeClass>(cls_dist(rng));
    const auto [w, h] = detail::draw_size(spec, cls, rng);
    const bool clustered = unit(rng) < spec.clustered_fraction;
    const Point centre = centres[pick_centre(rng)];
    bool placed = false;
    for (std::size_t attempt = 0; attempt < spec.retry_budget && !placed; ++attempt) {
      // Clustered objects fall back to uniform placement for the second half
      // of the budget so dense clusters do not exhaust it.
      double cx;
      double cy;
      if (clustered && attempt < spec.retry_budget / 2) {
        cx = centre.x + offset(rng);
        cy = centre.y + offset(rng);
      } else {
        cx = ux(rng);
        cy = uy(rng);
      }
      const double x0 = std::clamp(std::round(cx - w / 2.0), 0.0, W - w);
      const double y0 = std::clamp(std::round(cy - h / 2.0), 0.0, H - h);
      const BBox b{x0, y0, x0 + w, y0 + h};
      bool ok = true;
      for (const auto& other : scene.boxes) {
        if (iou(b, other) > spec.max_overlap) {
          ok = false;
          break;
        }
      }
      if (ok) {
        scene.boxes.push_back(b);
        placed = true;
      }
    }
    if (!placed) {
      std::clog << "synthgen: gave up placing object " << i << " of " << n << " in '" << scene.id << "' after "
                << spec.retry_budget << " attempts\n";
      fail(ErrorKind::infeasible_spec, "scene '" + scene.id + "': placed " + std::to_string(scene.boxes.size()) +
                                           " of " + std::to_string(n) + " objects within the retry budget");
    }
  }
  scene.points = density::points_from_boxes(scene.boxes);
  return scene;
}

struct ManifestEntry {
  std::string id;
  std::size_t count = 0;
  bool high_density = false;
};

/// Ground truth for `n` images; image i uses seed mix(seed, i) and id
/// "<prefix>_<i>" zero-padded to four digits.
inline Dataset generate_scenes(const SceneSpec& spec, std::size_t n, std::uint64_t seed,
                               const std::string& prefix = "img", std::size_t first_index = 0) {
  Dataset ds;
  ds.scenes.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t idx = first_index + i;
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s_%04zu", prefix.c_str(), idx);
    ds.scenes.push_back(generate_scene(spec, hash_combine(mix64(seed), idx), buf));
  }
  return ds;
}

struct BenchmarkSpec {
  SceneSpec normal = normal_spec();
  SceneSpec high = high_density_spec();
  std::size_t normal_images = 100;
  std::size_t high_images = 20;
};

/// The mixed benchmark: normal scenes first, then high-density scenes.
inline Dataset generate_benchmark(const BenchmarkSpec& spec, std::uint64_t seed) {
  Dataset ds = generate_scenes(spec.normal, spec.normal_images, seed, "img", 0);
  Dataset hi = generate_scenes(spec.high, spec.high_images, seed, "img", spec.normal_images);
  for (auto& s : hi.scenes) ds.scenes.push_back(std::move(s));
  return ds;
}

/// With a cut, an image is high-density iff its count reaches the cut;
/// without one the scene's own density level is used.
inline std::vector<ManifestEntry> manifest_entries(const Dataset& ds, std::optional<std::size_t> high_cut) {
  std::vector<ManifestEntry> out;
  for (const auto& s : ds.scenes) {
    const bool high = high_cut ? s.count() >= *high_cut : s.density_level == DensityLevel::high;
    out.push_back({s.id, s.count(), high});
  }
  return out;
}

inline nlohmann::json manifest_json(const Dataset& ds, std::uint64_t seed, std::optional<std::size_t> high_cut) {
  nlohmann::json images = nlohmann::json::array();
  for (const auto& e : manifest_entries(ds, high_cut))
    images.push_back({{"id", e.id}, {"count", e.count}, {"high_density", e.high_density}});
  nlohmann::json j{{"schema", "hycount-manifest"}, {"version", 1}, {"seed", seed}, {"images", images}};
  j["high_density_cut"] = high_cut ? nlohmann::json(*high_cut) : nlohmann::json(nullptr);
  return j;
}

struct WrittenDataset {
  Dataset dataset;
  std::filesystem::path annotations;
  std::filesystem::path manifest;
};

/// Writes annotations.ndjson and manifest.json into `dir`.
inline WrittenDataset write_dataset(const Dataset& ds, const std::filesystem::path& dir, std::uint64_t seed,
                                    std::optional<std::size_t> high_cut) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail(ErrorKind::io, "cannot create '" + dir.string() + "': " + ec.message());
  WrittenDataset out{ds, dir / "annotations.ndjson", dir / "manifest.json"};
  {
    std::ofstream f(out.annotations, std::ios::binary);
    if (!f) fail(ErrorKind::io, "cannot write '" + out.annotations.string() + "'");
    annotations::write_annotations(f, ds);
  }
  {
    std::ofstream f(out.manifest, std::ios::binary);
    if (!f) fail(ErrorKind::io, "cannot write '" + out.manifest.string() + "'");
    f << manifest_json(ds, seed, high_cut).dump(2) << '\n';
  }
  return out;
}

inline WrittenDataset generate_dataset(const SceneSpec& spec, std::size_t n, std::uint64_t seed,
                                       const std::filesystem::path& dir,
                                       std::optional<std::size_t> high_cut = std::nullopt) {
  if (n == 0) fail(ErrorKind::invalid_argument, "dataset must contain at least one image");
  return write_dataset(generate_scenes(spec, n, seed), dir, seed, high_cut);
}

}  // namespace hycount::synthgen

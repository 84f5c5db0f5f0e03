#pragma once

// Density maps: non-negative grids whose sum is an object count.
//
// Cell (x, y) covers the pixel square [x, x+1) x [y, y+1) and is sampled at
// its centre (x + 0.5, y + 0.5). Values are stored row-major.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "hycount/errors.hpp"
#include "hycount/geometry.hpp"

namespace hycount::density {

class DensityMap {
 public:
  DensityMap() = default;
  DensityMap(std::size_t width, std::size_t height, double fill = 0.0)
      : width_(width), height_(height), values_(width * height, fill) {}
  DensityMap(std::size_t width, std::size_t height, std::vector<double> values)
      : width_(width), height_(height), values_(std::move(values)) {
    if (values_.size() != width_ * height_)
      fail(ErrorKind::invalid_argument, "density map value count does not match its dimensions");
  }

  std::size_t width() const { return width_; }
  std::size_t height() const { return height_; }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  double& at(std::size_t x, std::size_t y) { return values_[y * width_ + x]; }
  double at(std::size_t x, std::size_t y) const { return values_[y * width_ + x]; }

  const std::vector<double>& values() const { return values_; }
  std::vector<double>& values() { return values_; }

  friend bool operator==(const DensityMap&, const DensityMap&) = default;

 private:
  std::size_t width_ = 0;
  std::size_t height_ = 0;
  std::vector<double> values_;
};

struct KernelConfig {
  double sigma = 4.0;              // pixels
  double truncation_radius = 4.0;  // in multiples of sigma

  void validate() const {
    if (!(sigma > 0.0) || !std::isfinite(sigma))
      fail(ErrorKind::invalid_argument, "kernel sigma must be positive");
    if (!(truncation_radius > 0.0) || !std::isfinite(truncation_radius))
      fail(ErrorKind::invalid_argument, "kernel truncation radius must be positive");
  }
};

inline double integrate(const DensityMap& map) {
  // Neumaier summation keeps 640x640 sums accurate well below 1e-9.
  double sum = 0.0;
  double comp = 0.0;
  for (double v : map.values()) {
    const double t = sum + v;
    if (std::abs(sum) >= std::abs(v))
      comp += (sum - t) + v;
    else
      comp += (v - t) + sum;
    sum = t;
  }
  return sum + comp;
}

/// Multiplies every cell so the map integrates to `target`. An all-zero map
/// with a positive target becomes uniform.
inline void rescale_to(DensityMap& map, double target) {
  if (map.empty()) return;
  const double current = integrate(map);
  if (current > 0.0) {
    const double k = target / current;
    for (double& v : map.values()) v *= k;
  } else {
    std::fill(map.values().begin(), map.values().end(), target / static_cast<double>(map.size()));
  }
}

/// Adds one unit of mass spread as a truncated Gaussian around `p`. The bump
/// is renormalized after truncation and border clipping so it always sums to 1.
inline void deposit_point(DensityMap& map, const Point& p, const KernelConfig& k) {
  const double radius = k.sigma * k.truncation_radius;
  const double inv_two_var = 1.0 / (2.0 * k.sigma * k.sigma);
  const auto lo = [](double c, double r) { return std::max(0.0, std::floor(c - r - 0.5)); };
  const auto hi = [](double c, double r, std::size_t n) {
    return std::min(static_cast<double>(n) - 1.0, std::ceil(c + r - 0.5));
  };
  const auto x0 = static_cast<std::size_t>(lo(p.x, radius));
  const auto x1 = static_cast<std::size_t>(hi(p.x, radius, map.width()));
  const auto y0 = static_cast<std::size_t>(lo(p.y, radius));
  const auto y1 = static_cast<std::size_t>(hi(p.y, radius, map.height()));

  const std::size_t bw = x1 - x0 + 1;
  std::vector<double> bump(bw * (y1 - y0 + 1), 0.0);
  double total = 0.0;
  for (std::size_t y = y0; y <= y1; ++y) {
    const double dy = static_cast<double>(y) + 0.5 - p.y;
    for (std::size_t x = x0; x <= x1; ++x) {
      const double dx = static_cast<double>(x) + 0.5 - p.x;
      const double d2 = dx * dx + dy * dy;
      if (d2 > radius * radius) continue;
      const double w = std::exp(-d2 * inv_two_var);
      bump[(y - y0) * bw + (x - x0)] = w;
      total += w;
    }
  }
  if (total <= 0.0) {
    // Radius smaller than the distance to any cell centre.
    map.at(static_cast<std::size_t>(p.x), static_cast<std::size_t>(p.y)) += 1.0;
    return;
  }
  for (std::size_t y = y0; y <= y1; ++y)
    for (std::size_t x = x0; x <= x1; ++x) map.at(x, y) += bump[(y - y0) * bw + (x - x0)] / total;
}

inline DensityMap generate_density_map(const std::vector<Point>& points, std::size_t width,
                                       std::size_t height, const KernelConfig& k = {}) {
  k.validate();
  if (width == 0 || height == 0) fail(ErrorKind::invalid_argument, "density map dimensions must be >= 1");
  DensityMap map(width, height);
  for (std::size_t i = 0; i < points.size(); ++i) {
    const Point& p = points[i];
    if (!(p.x >= 0.0 && p.x < static_cast<double>(width) && p.y >= 0.0 &&
          p.y < static_cast<double>(height))) {
      std::ostringstream msg;
      msg << "point " << i << " (" << p.x << ", " << p.y << ") lies outside the " << width << "x"
          << height << " image";
      fail(ErrorKind::invalid_argument, msg.str());
    }
    deposit_point(map, p, k);
  }
  return map;
}

/// Half-pixel bilinear upsampling (edge samples clamp), followed by one
/// global rescale so the integral is unchanged.
inline DensityMap upsample_bilinear(const DensityMap& map, std::size_t factor) {
  if (factor == 0) fail(ErrorKind::invalid_argument, "upsample factor must be >= 1");
  if (factor == 1 || map.empty()) {
    if (factor == 1) return map;
    return DensityMap(map.width() * factor, map.height() * factor);
  }
  const std::size_t w = map.width();
  const std::size_t h = map.height();
  DensityMap out(w * factor, h * factor);
  const double f = static_cast<double>(factor);

  struct Tap {
    std::size_t i0, i1;
    double t;
  };
  auto taps = [f](std::size_t n_out, std::size_t n_in) {
    std::vector<Tap> t(n_out);
    const double max_src = static_cast<double>(n_in) - 1.0;
    for (std::size_t o = 0; o < n_out; ++o) {
      const double u = std::clamp((static_cast<double>(o) + 0.5) / f - 0.5, 0.0, max_src);
      const auto i0 = static_cast<std::size_t>(std::floor(u));
      const std::size_t i1 = std::min(i0 + 1, n_in - 1);
      t[o] = {i0, i1, u - static_cast<double>(i0)};
    }
    return t;
  };
  const auto tx = taps(out.width(), w);
  const auto ty = taps(out.height(), h);

  for (std::size_t oy = 0; oy < out.height(); ++oy) {
    const Tap& a = ty[oy];
    for (std::size_t ox = 0; ox < out.width(); ++ox) {
      const Tap& b = tx[ox];
      const double top = map.at(b.i0, a.i0) * (1.0 - b.t) + map.at(b.i1, a.i0) * b.t;
      const double bottom = map.at(b.i0, a.i1) * (1.0 - b.t) + map.at(b.i1, a.i1) * b.t;
      out.at(ox, oy) = top * (1.0 - a.t) + bottom * a.t;
    }
  }
  const double target = integrate(map);
  if (target > 0.0) rescale_to(out, target);
  return out;
}

/// Sums non-overlapping factor x factor blocks; trailing partial blocks are
/// kept, so the result is ceil(w / factor) x ceil(h / factor).
inline DensityMap sum_pool(const DensityMap& map, std::size_t factor) {
  if (factor == 0) fail(ErrorKind::invalid_argument, "pool factor must be >= 1");
  if (factor == 1) return map;
  DensityMap out((map.width() + factor - 1) / factor, (map.height() + factor - 1) / factor);
  for (std::size_t y = 0; y < map.height(); ++y)
    for (std::size_t x = 0; x < map.width(); ++x) out.at(x / factor, y / factor) += map.at(x, y);
  return out;
}

/// Top-left crop to width x height (both must not exceed the map).
inline DensityMap crop(const DensityMap& map, std::size_t width, std::size_t height) {
  if (width > map.width() || height > map.height())
    fail(ErrorKind::invalid_argument, "crop exceeds density map bounds");
  DensityMap out(width, height);
  for (std::size_t y = 0; y < height; ++y)
    for (std::size_t x = 0; x < width; ++x) out.at(x, y) = map.at(x, y);
  return out;
}

inline std::vector<Point> points_from_boxes(const std::vector<BBox>& boxes) {
  std::vector<Point> pts;
  pts.reserve(boxes.size());
  for (const auto& b : boxes) pts.push_back(b.center());
  return pts;
}

}  // namespace hycount::density

#pragma once

// Axis-aligned box arithmetic. Coordinates are real-valued pixels with the
// origin at the top-left corner, x to the right and y down. A box spans the
// closed rectangle [x_min, x_max] x [y_min, y_max] and its area is
// width * height (no "+1" pixel convention).

#include <algorithm>
#include <optional>
#include <ostream>

namespace hycount {

struct Point {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point&, const Point&) = default;
};

struct BBox {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;

  double width() const { return x_max - x_min; }
  double height() const { return y_max - y_min; }
  double area() const { return width() * height(); }
  Point center() const { return {0.5 * (x_min + x_max), 0.5 * (y_min + y_max)}; }

  bool valid() const { return x_min <= x_max && y_min <= y_max; }

  bool contains(const BBox& other) const {
    return other.x_min >= x_min && other.y_min >= y_min && other.x_max <= x_max &&
           other.y_max <= y_max;
  }

  friend bool operator==(const BBox&, const BBox&) = default;
};

inline std::ostream& operator<<(std::ostream& os, const BBox& b) {
  return os << '(' << b.x_min << ',' << b.y_min << ',' << b.x_max << ',' << b.y_max << ')';
}

struct Detection {
  BBox box;
  double score = 0.0;  // confidence in [0, 1]

  friend bool operator==(const Detection&, const Detection&) = default;
};

inline std::ostream& operator<<(std::ostream& os, const Detection& d) {
  return os << d.box << '@' << d.score;
}

/// Intersection over union. Degenerate pairs (zero union) give 0, and so
/// does any pair involving a zero-area box.
inline double iou(const BBox& a, const BBox& b) {
  const double iw = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
  const double ih = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  if (uni <= 0.0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

/// Intersection of `b` with `window`, or nullopt when they do not overlap.
/// Touching edges produce a zero-area box rather than nullopt.
inline std::optional<BBox> clip(const BBox& b, const BBox& window) {
  BBox out{std::max(b.x_min, window.x_min), std::max(b.y_min, window.y_min),
           std::min(b.x_max, window.x_max), std::min(b.y_max, window.y_max)};
  if (!out.valid()) return std::nullopt;
  return out;
}

inline BBox translate(const BBox& b, double dx, double dy) {
  return {b.x_min + dx, b.y_min + dy, b.x_max + dx, b.y_max + dy};
}

}  // namespace hycount

#pragma once

// Model boundary. A detector turns an image (or a crop of it) into scored
// boxes; a density estimator turns an image into a density grid at
// 1/output_scale resolution. Concrete backends live in replay.hpp and
// synthetic.hpp.

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "hycount/density.hpp"
#include "hycount/errors.hpp"
#include "hycount/geometry.hpp"

namespace hycount {

struct ImageRef {
  std::string id;
  std::size_t width = 0;
  std::size_t height = 0;
  std::optional<std::string> payload;  // path to pixel data, unused by bundled backends

  BBox bounds() const { return {0.0, 0.0, static_cast<double>(width), static_cast<double>(height)}; }
};

struct Capabilities {
  bool concurrent_safe = true;
  bool accepts_crops = true;
};

class DetectorBackend {
 public:
  virtual ~DetectorBackend() = default;

  virtual Capabilities capabilities() const = 0;

  /// With a crop, boxes are returned in crop-local coordinates and lie
  /// inside [0, crop.width()] x [0, crop.height()]. Without one, boxes are in
  /// image coordinates.
  virtual std::vector<Detection> detect(const ImageRef& image, const std::optional<BBox>& crop) const = 0;
};

class DensityBackend {
 public:
  virtual ~DensityBackend() = default;

  virtual Capabilities capabilities() const = 0;
  virtual std::size_t output_scale() const = 0;

  /// Native-resolution grid; must be ceil(width / scale) x ceil(height / scale).
  virtual density::DensityMap estimate_native(const ImageRef& image) const = 0;
};

inline std::vector<Detection> detect(const DetectorBackend& backend, const ImageRef& image,
                                     const std::optional<BBox>& crop = std::nullopt) {
  if (image.width == 0 || image.height == 0)
    fail(ErrorKind::invalid_argument, "image '" + image.id + "' has zero size");
  return backend.detect(image, crop);
}

/// Runs the estimator, checks the grid against the declared output scale, and
/// brings the map to image resolution with a count-preserving upsample.
inline density::DensityMap estimate_density(const DensityBackend& backend, const ImageRef& image) {
  if (image.width == 0 || image.height == 0)
    fail(ErrorKind::invalid_argument, "image '" + image.id + "' has zero size");
  const std::size_t scale = backend.output_scale();
  if (scale == 0) fail(ErrorKind::invalid_argument, "density backend declares output scale 0");
  density::DensityMap native = backend.estimate_native(image);
  const std::size_t want_w = (image.width + scale - 1) / scale;
  const std::size_t want_h = (image.height + scale - 1) / scale;
  if (native.width() != want_w || native.height() != want_h) {
    fail(ErrorKind::dimension_mismatch,
         "density grid for '" + image.id + "' is " + std::to_string(native.width()) + "x" +
             std::to_string(native.height()) + ", expected " + std::to_string(want_w) + "x" +
             std::to_string(want_h) + " at output scale " + std::to_string(scale));
  }
  const double count = density::integrate(native);
  density::DensityMap full = density::upsample_bilinear(native, scale);
  if (full.width() != image.width || full.height() != image.height) {
    full = density::crop(full, image.width, image.height);
    if (count > 0.0) density::rescale_to(full, count);
  }
  return full;
}

}  // namespace hycount

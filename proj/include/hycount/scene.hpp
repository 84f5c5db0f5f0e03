#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "hycount/backend.hpp"
#include "hycount/geometry.hpp"

namespace hycount {

enum class DensityLevel { normal, high };

inline const char* to_string(DensityLevel level) { return level == DensityLevel::high ? "high" : "normal"; }

/// Ground truth for one image.
struct Scene {
  std::string id;
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<BBox> boxes;
  std::vector<Point> points;
  DensityLevel density_level = DensityLevel::normal;

  ImageRef image() const { return {id, width, height, std::nullopt}; }
  std::size_t count() const { return points.size(); }

  friend bool operator==(const Scene&, const Scene&) = default;
};

struct Dataset {
  std::vector<Scene> scenes;

  const Scene* find(std::string_view id) const {
    for (const auto& s : scenes)
      if (s.id == id) return &s;
    return nullptr;
  }

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

/// splitmix64 finalizer, used to derive independent per-call seeds.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t hash_combine(std::uint64_t h, std::uint64_t v) { return mix64(h ^ mix64(v)); }

inline std::uint64_t hash_string(std::uint64_t h, std::string_view s) {
  for (unsigned char c : s) h = hash_combine(h, c);
  return hash_combine(h, s.size());
}

}  // namespace hycount

#pragma once

// File-replay backends: serve predictions exported from any trained model.
//
// Detection replay file (newline-delimited JSON, version 1). An optional
// first line declares the schema:
//   {"schema": "hycount-detections", "version": 1}
// followed by one record per image:
//   {"id": "img_0001", "detections": [[x_min, y_min, x_max, y_max, score], ...]}
// Boxes are image coordinates. Blank lines are ignored.
//
// Density replay file (binary, little-endian):
//   "HYDR"  magic
//   u32     version (1)
//   repeated until EOF:
//     u32   identifier length in bytes
//     bytes identifier (UTF-8)
//     grid  binary density grid (see density_io.hpp)
// A zero-byte file is a valid empty index.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <map>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "hycount/backend.hpp"
#include "hycount/density_io.hpp"
#include "hycount/errors.hpp"

namespace hycount::replay {

inline constexpr const char* kDetectionSchema = "hycount-detections";
inline constexpr int kDetectionVersion = 1;
inline constexpr char kDensityMagic[4] = {'H', 'Y', 'D', 'R'};
inline constexpr std::uint32_t kDensityVersion = 1;

using DetectionIndex = std::map<std::string, std::vector<Detection>>;
using DensityIndex = std::map<std::string, density::DensityMap>;

namespace detail {

inline Detection parse_detection(const nlohmann::json& j, std::size_t line) {
  auto bad = [line](const std::string& why) {
    fail(ErrorKind::parse, "detections line " + std::to_string(line) + ": " + why);
  };
  if (!j.is_array() || j.size() != 5) bad("each detection must be [x_min, y_min, x_max, y_max, score]");
  for (const auto& v : j)
    if (!v.is_number()) bad("detection fields must be numbers");
  Detection d{{j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()},
              j[4].get<double>()};
  if (!d.box.valid()) bad("box has x_min > x_max or y_min > y_max");
  if (!(d.score >= 0.0 && d.score <= 1.0)) bad("score outside [0, 1]");
  return d;
}

}  // namespace detail

inline DetectionIndex read_detections(std::istream& is) {
  DetectionIndex index;
  std::string text;
  std::size_t line = 0;
  bool first = true;
  while (std::getline(is, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      fail(ErrorKind::parse, "detections line " + std::to_string(line) + ": " + e.what());
    }
    if (!j.is_object()) fail(ErrorKind::parse, "detections line " + std::to_string(line) + ": expected an object");
    if (first && j.contains("schema")) {
      first = false;
      if (j["schema"] != kDetectionSchema || j.value("version", 0) != kDetectionVersion)
        fail(ErrorKind::parse, "detections line " + std::to_string(line) + ": unsupported schema header");
      continue;
    }
    first = false;
    if (!j.contains("id") || !j["id"].is_string())
      fail(ErrorKind::parse, "detections line " + std::to_string(line) + ": missing string 'id'");
    const std::string id = j["id"].get<std::string>();
    const auto& arr = j.contains("detections") ? j["detections"] : nlohmann::json::array();
    if (!arr.is_array())
      fail(ErrorKind::parse, "detections line " + std::to_string(line) + ": 'detections' must be an array");
    std::vector<Detection> dets;
    dets.reserve(arr.size());
    for (const auto& d : arr) dets.push_back(detail::parse_detection(d, line));
    if (!index.emplace(id, std::move(dets)).second)
      fail(ErrorKind::parse, "detections line " + std::to_string(line) + ": duplicate identifier '" + id + "'");
  }
  return index;
}

inline void write_detections(std::ostream& os, const DetectionIndex& index) {
  os << nlohmann::json{{"schema", kDetectionSchema}, {"version", kDetectionVersion}}.dump() << '\n';
  for (const auto& [id, dets] : index) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& d : dets) arr.push_back({d.box.x_min, d.box.y_min, d.box.x_max, d.box.y_max, d.score});
    os << nlohmann::json{{"id", id}, {"detections", arr}}.dump() << '\n';
  }
}

inline DensityIndex read_densities(std::istream& is) {
  DensityIndex index;
  char magic[4];
  is.read(magic, 4);
  if (is.gcount() == 0) return index;
  if (is.gcount() != 4 || std::memcmp(magic, kDensityMagic, 4) != 0)
    fail(ErrorKind::parse, "density replay: bad magic");
  const std::uint32_t version = density::detail::get_u32(is, "version");
  if (version != kDensityVersion)
    fail(ErrorKind::parse, "density replay: unsupported version " + std::to_string(version));
  for (std::size_t record = 0;; ++record) {
    if (is.peek() == std::char_traits<char>::eof()) break;
    const std::string where = "density replay record " + std::to_string(record);
    std::uint32_t len;
    std::string id;
    density::DensityMap grid;
    try {
      len = density::detail::get_u32(is, "identifier length");
      id.resize(len);
      is.read(id.data(), len);
      if (static_cast<std::uint32_t>(is.gcount()) != len) fail(ErrorKind::parse, "truncated identifier");
      grid = density::read_grid(is);
    } catch (const Error& e) {
      fail(ErrorKind::parse, where + ": " + e.what());
    }
    if (!index.emplace(id, std::move(grid)).second)
      fail(ErrorKind::parse, where + ": duplicate identifier '" + id + "'");
  }
  return index;
}

inline void write_densities(std::ostream& os, const DensityIndex& index) {
  os.write(kDensityMagic, 4);
  density::detail::put_u32(os, kDensityVersion);
  for (const auto& [id, grid] : index) {
    density::detail::put_u32(os, static_cast<std::uint32_t>(id.size()));
    os.write(id.data(), static_cast<std::streamsize>(id.size()));
    density::write_grid(os, grid);
  }
}

inline std::ifstream open_input(const std::string& path, std::ios::openmode mode = std::ios::in) {
  std::ifstream in(path, mode);
  if (!in) fail(ErrorKind::io, "cannot open '" + path + "'");
  return in;
}

inline DetectionIndex load_detections(const std::string& path) {
  auto in = open_input(path);
  try {
    return read_detections(in);
  } catch (const Error& e) {
    throw Error(e.kind(), path + ": " + e.what());
  }
}

inline DensityIndex load_densities(const std::string& path) {
  auto in = open_input(path, std::ios::in | std::ios::binary);
  try {
    return read_densities(in);
  } catch (const Error& e) {
    throw Error(e.kind(), path + ": " + e.what());
  }
}

/// Serves stored whole-image detections. Crops are not supported, so the
/// split-merge driver hands it the full image and only runs the merge NMS.
class ReplayDetector final : public DetectorBackend {
 public:
  explicit ReplayDetector(DetectionIndex index)
      : index_(std::make_shared<const DetectionIndex>(std::move(index))) {}

  Capabilities capabilities() const override { return {true, false}; }

  std::vector<Detection> detect(const ImageRef& image, const std::optional<BBox>& crop) const override {
    if (crop) fail(ErrorKind::invalid_argument, "replay detector does not accept crops");
    auto it = index_->find(image.id);
    if (it == index_->end()) fail(ErrorKind::replay_miss, "no stored detections for '" + image.id + "'");
    return it->second;
  }

  const DetectionIndex& index() const { return *index_; }

 private:
  std::shared_ptr<const DetectionIndex> index_;
};

class ReplayDensity final : public DensityBackend {
 public:
  explicit ReplayDensity(DensityIndex index, std::size_t output_scale = 8)
      : index_(std::make_shared<const DensityIndex>(std::move(index))), scale_(output_scale) {
    if (scale_ == 0) fail(ErrorKind::invalid_argument, "output scale must be >= 1");
  }

  Capabilities capabilities() const override { return {true, true}; }
  std::size_t output_scale() const override { return scale_; }

  density::DensityMap estimate_native(const ImageRef& image) const override {
    auto it = index_->find(image.id);
    if (it == index_->end()) fail(ErrorKind::replay_miss, "no stored density grid for '" + image.id + "'");
    return it->second;
  }

  const DensityIndex& index() const { return *index_; }

 private:
  std::shared_ptr<const DensityIndex> index_;
  std::size_t scale_;
};

}  // namespace hycount::replay

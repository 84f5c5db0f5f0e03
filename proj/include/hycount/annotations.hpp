#pragma once

// Annotation files: newline-delimited JSON, one record per image.
//
//   {"schema": "hycount-annotations", "version": 1}            optional header
//   {"id": "img_0000", "width": 640, "height": 640,
//    "boxes": [[x_min, y_min, x_max, y_max], ...],
//    "points": [[x, y], ...],                                   optional
//    "density_level": "normal" | "high"}                        optional
//
// Boxes must lie inside [0, width] x [0, height] and points inside
// [0, width) x [0, height). When "points" is absent the box centres are used.
// The number of points need not match the number of boxes.

#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <string>

#include <json.hpp>

#include "hycount/density.hpp"
#include "hycount/errors.hpp"
#include "hycount/scene.hpp"

namespace hycount::annotations {

inline constexpr const char* kSchema = "hycount-annotations";
inline constexpr int kVersion = 1;

namespace detail {

[[noreturn]] inline void bad(std::size_t line, const std::string& id, const std::string& why) {
  std::string where = "annotations line " + std::to_string(line);
  if (!id.empty()) where += " (image '" + id + "')";
  fail(ErrorKind::parse, where + ": " + why);
}

inline double number(const nlohmann::json& v, std::size_t line, const std::string& id) {
  if (!v.is_number()) bad(line, id, "expected a number");
  return v.get<double>();
}

inline std::size_t dimension(const nlohmann::json& j, const char* key, std::size_t line, const std::string& id) {
  if (!j.contains(key) || !j[key].is_number_unsigned() || j[key].get<std::size_t>() == 0)
    bad(line, id, std::string("'") + key + "' must be a positive integer");
  return j[key].get<std::size_t>();
}

}  // namespace detail

inline Scene parse_record(const nlohmann::json& j, std::size_t line) {
  if (!j.is_object()) detail::bad(line, "", "expected an object");
  if (!j.contains("id") || !j["id"].is_string()) detail::bad(line, "", "missing string 'id'");
  Scene s;
  s.id = j["id"].get<std::string>();
  s.width = detail::dimension(j, "width", line, s.id);
  s.height = detail::dimension(j, "height", line, s.id);
  const double w = static_cast<double>(s.width);
  const double h = static_cast<double>(s.height);

  if (j.contains("boxes")) {
    if (!j["boxes"].is_array()) detail::bad(line, s.id, "'boxes' must be an array");
    for (const auto& b : j["boxes"]) {
      if (!b.is_array() || b.size() != 4) detail::bad(line, s.id, "each box must be [x_min, y_min, x_max, y_max]");
      BBox box{detail::number(b[0], line, s.id), detail::number(b[1], line, s.id), detail::number(b[2], line, s.id),
               detail::number(b[3], line, s.id)};
      if (!box.valid()) detail::bad(line, s.id, "box has min > max");
      if (box.x_min < 0.0 || box.y_min < 0.0 || box.x_max > w || box.y_max > h) {
        std::ostringstream msg;
        msg << "box " << box << " exceeds the " << s.width << "x" << s.height << " image";
        detail::bad(line, s.id, msg.str());
      }
      s.boxes.push_back(box);
    }
  }
  if (j.contains("points")) {
    if (!j["points"].is_array()) detail::bad(line, s.id, "'points' must be an array");
    for (const auto& p : j["points"]) {
      if (!p.is_array() || p.size() != 2) detail::bad(line, s.id, "each point must be [x, y]");
      Point pt{detail::number(p[0], line, s.id), detail::number(p[1], line, s.id)};
      if (!(pt.x >= 0.0 && pt.x < w && pt.y >= 0.0 && pt.y < h)) {
        std::ostringstream msg;
        msg << "point (" << pt.x << ", " << pt.y << ") lies outside the " << s.width << "x" << s.height << " image";
        detail::bad(line, s.id, msg.str());
      }
      s.points.push_back(pt);
    }
  } else {
    s.points = density::points_from_boxes(s.boxes);
  }
  if (j.contains("density_level")) {
    const auto& lvl = j["density_level"];
    if (lvl == "high") s.density_level = DensityLevel::high;
    else if (lvl == "normal") s.density_level = DensityLevel::normal;
    else detail::bad(line, s.id, "'density_level' must be \"normal\" or \"high\"");
  }
  return s;
}

inline Dataset read_annotations(std::istream& is) {
  Dataset ds;
  std::set<std::string> seen;
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
      detail::bad(line, "", e.what());
    }
    if (first && j.is_object() && j.contains("schema")) {
      first = false;
      if (j["schema"] != kSchema || j.value("version", 0) != kVersion)
        detail::bad(line, "", "unsupported schema header");
      continue;
    }
    first = false;
    Scene s = parse_record(j, line);
    if (!seen.insert(s.id).second) detail::bad(line, s.id, "duplicate identifier");
    ds.scenes.push_back(std::move(s));
  }
  return ds;
}

inline Dataset load_annotations(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::io, "cannot open '" + path + "'");
  try {
    return read_annotations(in);
  } catch (const Error& e) {
    throw Error(e.kind(), path + ": " + e.what());
  }
}

inline nlohmann::json to_record(const Scene& s) {
  nlohmann::json boxes = nlohmann::json::array();
  for (const auto& b : s.boxes) boxes.push_back({b.x_min, b.y_min, b.x_max, b.y_max});
  nlohmann::json points = nlohmann::json::array();
  for (const auto& p : s.points) points.push_back({p.x, p.y});
  return {{"id", s.id},
          {"width", s.width},
          {"height", s.height},
          {"boxes", boxes},
          {"points", points},
          {"density_level", to_string(s.density_level)}};
}

inline void write_annotations(std::ostream& os, const Dataset& ds) {
  os << nlohmann::json{{"schema", kSchema}, {"version", kVersion}}.dump() << '\n';
  for (const auto& s : ds.scenes) os << to_record(s).dump() << '\n';
}

}  // namespace hycount::annotations

#pragma once

// Density grid serialization.
//
// Binary grid (all integers unsigned 32-bit little-endian):
//   offset 0   magic     "HYDM"
//   offset 4   width
//   offset 8   height
//   offset 12  encoding  1 = IEEE-754 binary64, little-endian
//   offset 16  width * height values, row-major
//
// CSV grid: `height` lines of `width` comma-separated values printed with
// 17 significant digits, so parsing recovers every value exactly.

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "hycount/density.hpp"
#include "hycount/errors.hpp"

namespace hycount::density {

inline constexpr char kGridMagic[4] = {'H', 'Y', 'D', 'M'};
inline constexpr std::uint32_t kEncodingF64LE = 1;
inline constexpr std::size_t kGridHeaderBytes = 16;

namespace detail {

inline void put_u32(std::ostream& os, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

inline void put_f64(std::ostream& os, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

inline bool get_bytes(std::istream& is, unsigned char* out, std::size_t n) {
  is.read(reinterpret_cast<char*>(out), static_cast<std::streamsize>(n));
  return static_cast<std::size_t>(is.gcount()) == n;
}

inline std::uint32_t get_u32(std::istream& is, const char* what) {
  unsigned char b[4];
  if (!get_bytes(is, b, 4)) fail(ErrorKind::parse, std::string("truncated density data reading ") + what);
  return std::uint32_t{b[0]} | (std::uint32_t{b[1]} << 8) | (std::uint32_t{b[2]} << 16) |
         (std::uint32_t{b[3]} << 24);
}

inline double get_f64(std::istream& is) {
  unsigned char b[8];
  if (!get_bytes(is, b, 8)) fail(ErrorKind::parse, "truncated density grid values");
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= std::uint64_t{b[i]} << (8 * i);
  return std::bit_cast<double>(bits);
}

}  // namespace detail

inline void write_grid(std::ostream& os, const DensityMap& map) {
  os.write(kGridMagic, 4);
  detail::put_u32(os, static_cast<std::uint32_t>(map.width()));
  detail::put_u32(os, static_cast<std::uint32_t>(map.height()));
  detail::put_u32(os, kEncodingF64LE);
  for (double v : map.values()) detail::put_f64(os, v);
}

inline DensityMap read_grid(std::istream& is) {
  char magic[4];
  is.read(magic, 4);
  if (is.gcount() != 4 || std::memcmp(magic, kGridMagic, 4) != 0)
    fail(ErrorKind::parse, "density grid: bad magic");
  const std::uint32_t w = detail::get_u32(is, "width");
  const std::uint32_t h = detail::get_u32(is, "height");
  const std::uint32_t enc = detail::get_u32(is, "encoding");
  if (enc != kEncodingF64LE)
    fail(ErrorKind::parse, "density grid: unsupported value encoding " + std::to_string(enc));
  std::vector<double> values(std::size_t{w} * h);
  for (double& v : values) {
    v = detail::get_f64(is);
    if (!std::isfinite(v) || v < 0.0) fail(ErrorKind::parse, "density grid: negative or non-finite cell");
  }
  return DensityMap(w, h, std::move(values));
}

inline void write_grid_csv(std::ostream& os, const DensityMap& map) {
  char buf[40];
  for (std::size_t y = 0; y < map.height(); ++y) {
    for (std::size_t x = 0; x < map.width(); ++x) {
      if (x) os << ',';
      std::snprintf(buf, sizeof buf, "%.17g", map.at(x, y));
      os << buf;
    }
    os << '\n';
  }
}

inline DensityMap read_grid_csv(std::istream& is) {
  std::vector<double> values;
  std::size_t width = 0;
  std::size_t height = 0;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::size_t cols = 0;
    std::stringstream row(line);
    std::string cell;
    while (std::getline(row, cell, ',')) {
      try {
        values.push_back(std::stod(cell));
      } catch (const std::exception&) {
        fail(ErrorKind::parse, "density csv line " + std::to_string(height + 1) + ": bad number '" + cell + "'");
      }
      ++cols;
    }
    if (height == 0) width = cols;
    if (cols != width)
      fail(ErrorKind::parse, "density csv line " + std::to_string(height + 1) + ": ragged row");
    ++height;
  }
  return DensityMap(width, height, std::move(values));
}

}  // namespace hycount::density

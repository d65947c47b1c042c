#pragma once

#include <algorithm>
#include <filesystem>
#include <string>

#include "schematik/geometry.hpp"

namespace testing {

/// Fresh directory under the build tree, removed first if it exists.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::current_path() / "scratch" / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

/// Counts pixels covered by both boxes on the integer grid.
inline long pixel_overlap(const schematik::BoundingBox& a, const schematik::BoundingBox& b) {
  long n = 0;
  for (long y = static_cast<long>(std::min(a.y_min, b.y_min)); y < std::max(a.y_max, b.y_max); ++y) {
    for (long x = static_cast<long>(std::min(a.x_min, b.x_min)); x < std::max(a.x_max, b.x_max); ++x) {
      const bool in_a = x >= a.x_min && x < a.x_max && y >= a.y_min && y < a.y_max;
      const bool in_b = x >= b.x_min && x < b.x_max && y >= b.y_min && y < b.y_max;
      n += in_a && in_b;
    }
  }
  return n;
}

inline double pixel_iou(const schematik::BoundingBox& a, const schematik::BoundingBox& b) {
  const long inter = pixel_overlap(a, b);
  const double uni = a.width() * a.height() + b.width() * b.height() - static_cast<double>(inter);
  return uni > 0 ? static_cast<double>(inter) / uni : 0.0;
}

}  // namespace testing

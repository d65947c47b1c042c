#include "schematik/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace schematik {

bool BoundingBox::valid() const {
  return std::isfinite(x_min) && std::isfinite(y_min) && std::isfinite(x_max) &&
         std::isfinite(y_max) && x_min < x_max && y_min < y_max;
}

bool BoundingBox::contains(const BoundingBox& o) const {
  return o.x_min >= x_min && o.y_min >= y_min && o.x_max <= x_max &&
         o.y_max <= y_max;
}

BoundingBox make_box(double x_min, double y_min, double x_max, double y_max) {
  BoundingBox b{x_min, y_min, x_max, y_max};
  if (!b.valid()) {
    throw std::invalid_argument("invalid bounding box " + to_string(b));
  }
  return b;
}

std::string to_string(const BoundingBox& b) {
  std::ostringstream os;
  os << '(' << b.x_min << ',' << b.y_min << ',' << b.x_max << ',' << b.y_max
     << ')';
  return os.str();
}

double area(const BoundingBox& b) {
  return std::max(0.0, b.width()) * std::max(0.0, b.height());
}

double intersection_area(const BoundingBox& a, const BoundingBox& b) {
  const double w = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
  const double h = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
  if (w <= 0.0 || h <= 0.0) return 0.0;
  return w * h;
}

double iou(const BoundingBox& a, const BoundingBox& b) {
  const double inter = intersection_area(a, b);
  if (inter <= 0.0) return 0.0;
  const double uni = area(a) + area(b) - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

BoundingBox union_box(std::span<const BoundingBox> boxes) {
  if (boxes.empty()) throw std::invalid_argument("union_box of an empty list");
  BoundingBox u = boxes.front();
  for (const auto& b : boxes.subspan(1)) {
    u.x_min = std::min(u.x_min, b.x_min);
    u.y_min = std::min(u.y_min, b.y_min);
    u.x_max = std::max(u.x_max, b.x_max);
    u.y_max = std::max(u.y_max, b.y_max);
  }
  return u;
}

bool clip_to_page(BoundingBox& b, double page_w, double page_h) {
  b.x_min = std::clamp(b.x_min, 0.0, page_w);
  b.x_max = std::clamp(b.x_max, 0.0, page_w);
  b.y_min = std::clamp(b.y_min, 0.0, page_h);
  b.y_max = std::clamp(b.y_max, 0.0, page_h);
  return b.valid();
}

BoundingBox pad_and_clip(const BoundingBox& b, double padding, double page_w,
                         double page_h) {
  if (!(padding >= 0.0)) throw std::invalid_argument("negative padding");
  BoundingBox out{b.x_min - padding, b.y_min - padding, b.x_max + padding,
                  b.y_max + padding};
  if (!clip_to_page(out, page_w, page_h)) {
    throw std::invalid_argument("box " + to_string(b) +
                                " is empty after clipping to the page");
  }
  return out;
}

long round_half_away(double v) { return std::lround(v); }

}  // namespace schematik

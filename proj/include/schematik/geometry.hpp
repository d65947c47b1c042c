#pragma once

#include <span>
#include <string>

namespace schematik {

/// Axis-aligned rectangle in pixel space (origin top-left, y down).
///
/// Min edges are closed and max edges open for pixel operations, so the
/// pixel width of a box is simply `x_max - x_min`.
struct BoundingBox {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;

  double width() const { return x_max - x_min; }
  double height() const { return y_max - y_min; }
  double center_x() const { return 0.5 * (x_min + x_max); }
  double center_y() const { return 0.5 * (y_min + y_max); }

  /// Finite coordinates and strictly positive extent on both axes.
  bool valid() const;
  bool contains(const BoundingBox& other) const;

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

/// Builds a box and throws std::invalid_argument unless it is valid.
BoundingBox make_box(double x_min, double y_min, double x_max, double y_max);

std::string to_string(const BoundingBox& b);

double area(const BoundingBox& b);

/// Area of the overlap of two boxes, 0 when disjoint or merely touching.
double intersection_area(const BoundingBox& a, const BoundingBox& b);

double iou(const BoundingBox& a, const BoundingBox& b);

/// Smallest box containing every input. Throws on an empty list.
BoundingBox union_box(std::span<const BoundingBox> boxes);

/// Grows every side by `padding` and clips to [0,page_w]x[0,page_h].
/// Throws std::invalid_argument when padding is negative or the clipped box
/// is empty.
BoundingBox pad_and_clip(const BoundingBox& b, double padding, double page_w,
                         double page_h);

/// Clips to the page; returns false when nothing of positive area remains.
bool clip_to_page(BoundingBox& b, double page_w, double page_h);

/// Half-away-from-zero rounding used whenever real coordinates become pixels.
long round_half_away(double v);

}  // namespace schematik

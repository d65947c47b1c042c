#include "schematik/postprocess.hpp"

#include <algorithm>
#include <tuple>

namespace schematik {

std::vector<Detection> filter_confidence(const std::vector<Detection>& dets, double threshold) {
  std::vector<Detection> out;
  std::copy_if(dets.begin(), dets.end(), std::back_inserter(out),
               [&](const Detection& d) { return d.confidence >= threshold; });
  return out;
}

bool merge_order(const Detection& a, const Detection& b) {
  return std::make_tuple(-a.confidence, a.box.x_min, a.box.y_min, a.box.x_max, a.box.y_max,
                         class_index(a.label)) <
         std::make_tuple(-b.confidence, b.box.x_min, b.box.y_min, b.box.x_max, b.box.y_max,
                         class_index(b.label));
}

namespace {

// One pass; returns true when any group had more than one member.
bool merge_pass(std::vector<Detection>& dets, double iou_threshold) {
  std::sort(dets.begin(), dets.end(), merge_order);
  std::vector<bool> consumed(dets.size(), false);
  std::vector<Detection> out;
  bool merged = false;
  for (std::size_t i = 0; i < dets.size(); ++i) {
    if (consumed[i]) continue;
    consumed[i] = true;
    const Detection& visitor = dets[i];
    if (visitor.label == LayoutClass::Curly) {
      out.push_back(visitor);
      continue;
    }
    std::vector<BoundingBox> group{visitor.box};
    for (std::size_t j = i + 1; j < dets.size(); ++j) {
      if (consumed[j] || dets[j].label == LayoutClass::Curly) continue;
      if (iou(visitor.box, dets[j].box) > iou_threshold) {
        consumed[j] = true;
        group.push_back(dets[j].box);
      }
    }
    merged = merged || group.size() > 1;
    out.push_back({union_box(group), visitor.label, visitor.confidence});
  }
  std::sort(out.begin(), out.end(), merge_order);
  dets = std::move(out);
  return merged;
}

}  // namespace

std::vector<Detection> merge_overlapping(const std::vector<Detection>& dets, double iou_threshold) {
  std::vector<Detection> cur = dets;
  for (int pass = 0; pass < kMaxMergePasses; ++pass) {
    if (!merge_pass(cur, iou_threshold)) break;
  }
  std::sort(cur.begin(), cur.end(), merge_order);
  return cur;
}

}  // namespace schematik

#pragma once

#include <vector>

#include "schematik/corpus.hpp"

namespace schematik {

inline constexpr double kDefaultConfidenceThreshold = 0.1;
inline constexpr double kDefaultMergeIou = 0.3;
inline constexpr int kMaxMergePasses = 16;

/// Keeps detections with confidence >= threshold, preserving order.
std::vector<Detection> filter_confidence(const std::vector<Detection>& dets,
                                         double threshold = kDefaultConfidenceThreshold);

/// Total order used for merge visits and for the merged output: confidence
/// descending, then x_min, y_min, x_max, y_max, label.
bool merge_order(const Detection& a, const Detection& b);

/// Replaces every group of non-Curly detections overlapping a visited
/// detection with IoU > iou_threshold by their union box carrying the
/// visitor's label and confidence. Passes repeat until nothing merges.
/// Curly detections pass through unchanged.
std::vector<Detection> merge_overlapping(const std::vector<Detection>& dets,
                                         double iou_threshold = kDefaultMergeIou);

}  // namespace schematik

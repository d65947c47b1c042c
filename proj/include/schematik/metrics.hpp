#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "schematik/corpus.hpp"

namespace schematik {

// Edit distance --------------------------------------------------------------

struct EditCounts {
  std::size_t insertions = 0;
  std::size_t deletions = 0;
  std::size_t substitutions = 0;
  std::size_t reference_length = 0;

  std::size_t errors() const { return insertions + deletions + substitutions; }
  friend bool operator==(const EditCounts&, const EditCounts&) = default;
};

/// Unit-cost alignment counts. Among minimal alignments the backtrace takes
/// a substitution (or match) first, then an insertion, then a deletion.
EditCounts edit_counts(const std::u32string& reference, const std::u32string& hypothesis);
EditCounts edit_counts(const std::vector<std::string>& reference,
                       const std::vector<std::string>& hypothesis);

/// (I + D + S) / N over Unicode code points. Throws std::invalid_argument
/// for an empty reference.
double cer(const std::string& reference, const std::string& hypothesis);
/// Same over whitespace-separated words.
double wer(const std::string& reference, const std::string& hypothesis);

// Detection matching ---------------------------------------------------------

inline constexpr double kMatchIouFloor = 0.25;

struct Match {
  std::size_t gt = 0;
  std::size_t pred = 0;
  double iou = 0.0;
};

struct MatchResult {
  std::vector<Match> matches;
  std::vector<std::size_t> unmatched_gt;
  std::vector<std::size_t> unmatched_pred;
};

/// One-to-one greedy matching by descending IoU; pairs below the floor are
/// left unmatched on both sides.
MatchResult match_detections(const PageAnnotation& gt, const std::vector<Detection>& preds,
                             double iou_floor = kMatchIouFloor);

/// Mean IoU over ground-truth elements; unmatched ones count 0. Throws for
/// an empty ground truth.
double bbox_accuracy(const MatchResult& m, std::size_t gt_count);

// Classification -------------------------------------------------------------

struct ClassCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t tn = 0;
};

struct ClassificationScores {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t decisions = 0;
  std::array<ClassCounts, kLayoutClassCount> counts{};
  std::array<bool, kLayoutClassCount> present{};
  std::array<double, kLayoutClassCount> class_precision{};
  std::array<double, kLayoutClassCount> class_recall{};
  std::array<double, kLayoutClassCount> class_f1{};
};

/// Decisions are matched pairs, unmatched ground truth and unmatched
/// predictions. Accuracy is correct matched labels over all decisions;
/// precision, recall and F1 are macro averages over classes occurring in
/// the ground truth or the predictions.
ClassificationScores classification_metrics(const PageAnnotation& gt,
                                            const std::vector<Detection>& preds,
                                            const MatchResult& m);

struct ConfusionMatrix {
  /// counts[gt][pred] over matched pairs.
  std::array<std::array<std::size_t, kLayoutClassCount>, kLayoutClassCount> counts{};

  void add(const ConfusionMatrix& other);
  /// Row-normalized; rows without matches are all zero.
  std::array<std::array<double, kLayoutClassCount>, kLayoutClassCount> normalized() const;
  bool row_present(LayoutClass gt) const;
};

ConfusionMatrix confusion_matrix(const PageAnnotation& gt, const std::vector<Detection>& preds,
                                 const MatchResult& m);

struct ConfidenceAccumulator {
  double sum = 0.0;
  std::size_t count = 0;
  std::optional<double> mean() const {
    return count ? std::optional<double>(sum / static_cast<double>(count)) : std::nullopt;
  }
};

struct ClassConfidence {
  ConfidenceAccumulator any;
  ConfidenceAccumulator correct;
  ConfidenceAccumulator incorrect;
};

using ConfidenceStats = std::array<ClassConfidence, kLayoutClassCount>;

/// Grouped by predicted class. A prediction is correct when it is matched
/// to ground truth of the same class; unmatched predictions are incorrect.
ConfidenceStats confidence_stats(const PageAnnotation& gt, const std::vector<Detection>& preds,
                                 const MatchResult& m);
void accumulate(ConfidenceStats& into, const ConfidenceStats& from);

/// 100 * (old - new) / old. Throws std::invalid_argument when old is 0.
double improvement(double old_rate, double new_rate);

// Reports --------------------------------------------------------------------

struct PageEval {
  std::string page_id;
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double bbox_accuracy = 0.0;
  std::optional<double> cer;
  std::optional<double> wer;
  ConfusionMatrix confusion;
  ConfidenceStats confidence{};
};

/// Detection metrics for one page.
PageEval evaluate_page(const PageAnnotation& gt, const std::vector<Detection>& preds);

struct EvalReport {
  std::vector<PageEval> pages;  // sorted by page_id
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double bbox_accuracy = 0.0;
  std::optional<double> cer;
  std::optional<double> wer;
  ConfusionMatrix confusion;
  ConfidenceStats confidence{};
  /// Free-form provenance copied into the JSON.
  std::vector<std::pair<std::string, std::string>> parameters;
};

/// Page means of every metric; confusion counts and confidences pooled.
EvalReport aggregate(std::vector<PageEval> pages);

std::string report_to_json(const EvalReport& r);
/// Reads the per-page part and recomputes the aggregates. Confusion and
/// confidence data are restored from the pooled sections.
EvalReport report_from_json(const std::string& text);
std::string per_page_csv(const EvalReport& r);

}  // namespace schematik

#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "schematik/augment.hpp"
#include "schematik/detectors.hpp"
#include "schematik/metrics.hpp"
#include "schematik/ocr_bridge.hpp"
#include "schematik/postprocess.hpp"
#include "schematik/snippets.hpp"

namespace schematik {

struct PipelineOptions {
  /// "oracle", "rlsa" or "external:FILE".
  std::string detector = "oracle";
  OraclePerturbation perturbation;
  RlsaParams rlsa;
  double confidence_threshold = kDefaultConfidenceThreshold;
  double merge_iou = kDefaultMergeIou;
  double padding = kDefaultPadding;
  double scale = kDefaultScale;
  /// "mock" or "external".
  std::string engine = "mock";
  CorruptionModel corruption;
  /// External engine template; empty falls back to SCHEMATIK_OCR_CMD.
  std::string ocr_command;
  std::string ocr_flags;
  /// OCR whole pages with the full-page mock instead of snippets.
  bool full_page = false;
  bool export_snippets = false;
  int workers = 1;
  std::uint64_t seed = 0;

  /// Every option as key/value text, recorded in run manifests and reports.
  std::vector<std::pair<std::string, std::string>> describe() const;
};

std::unique_ptr<Detector> make_detector(const std::string& spec, const DatasetManifest& m,
                                        const OraclePerturbation& perturbation,
                                        const RlsaParams& rlsa, std::uint64_t seed);

/// Runs detection for every manifest page.
std::vector<DetectorOutput> detect_all(const DatasetManifest& m, const Detector& detector,
                                       int workers = 1);

/// detect, filter, merge, order, snip, OCR and evaluate every page. Stage
/// outputs, the report and a run manifest are written under `out_dir`.
EvalReport run_pipeline(const DatasetManifest& m, const PipelineOptions& options,
                        const std::filesystem::path& out_dir);

struct SweepResult {
  std::vector<double> paddings;
  std::vector<double> scales;
  /// [padding][scale] page-mean error rates.
  std::vector<std::vector<double>> cer;
  std::vector<std::vector<double>> wer;
};

/// Repeats snipping and OCR over the padding x scale grid on one set of
/// merged detections. Writes CSV matrices and grayscale heatmaps.
SweepResult run_sweep(const DatasetManifest& m, const PipelineOptions& options,
                      const std::vector<double>& paddings, const std::vector<double>& scales,
                      const std::filesystem::path& out_dir);

std::string matrix_csv(const std::vector<double>& rows, const std::vector<double>& cols,
                       const std::vector<std::vector<double>>& values);
/// One square cell per value; darker means larger.
PageImage heatmap(const std::vector<std::vector<double>>& values, int cell = 48);

struct Scenario {
  std::string name;
  EvalReport report;
};

struct ScenarioRow {
  std::string name;
  double cer = 0.0;
  double wer = 0.0;
};

struct ImprovementRow {
  std::string from;
  std::string to;
  double cer_pct = 0.0;
  double wer_pct = 0.0;
};

struct Comparison {
  std::vector<ScenarioRow> rows;
  /// Every later scenario against every earlier one; empty for a single
  /// scenario.
  std::vector<ImprovementRow> improvements;
};

/// Throws std::invalid_argument when scenarios cover different page sets or
/// lack OCR rates.
Comparison compare_scenarios(const std::vector<Scenario>& scenarios);
std::string comparison_text(const Comparison& c);
std::string comparison_csv(const Comparison& c);

}  // namespace schematik

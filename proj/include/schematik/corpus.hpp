#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "schematik/geometry.hpp"

namespace schematik {

/// Raised for malformed or schema-violating input files.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class LayoutClass : std::uint8_t {
  Paragraph,
  BigParagraph,
  H1,
  H2,
  H3,
  H4,
  NameEntry,
  Curly,
};

inline constexpr std::size_t kLayoutClassCount = 8;
inline constexpr std::array<LayoutClass, kLayoutClassCount> kAllLayoutClasses{
    LayoutClass::Paragraph, LayoutClass::BigParagraph, LayoutClass::H1,
    LayoutClass::H2,        LayoutClass::H3,           LayoutClass::H4,
    LayoutClass::NameEntry, LayoutClass::Curly};

std::string_view to_string(LayoutClass c);
std::optional<LayoutClass> parse_layout_class(std::string_view name);
/// Throws FormatError for names outside the closed class set.
LayoutClass layout_class_from_string(std::string_view name);
inline std::size_t class_index(LayoutClass c) { return static_cast<std::size_t>(c); }

/// Classes whose elements span the full text width of the page.
bool is_full_width_class(LayoutClass c);

struct Detection {
  BoundingBox box;
  LayoutClass label = LayoutClass::Paragraph;
  double confidence = 1.0;

  friend bool operator==(const Detection&, const Detection&) = default;
};

struct AnnotatedElement {
  BoundingBox box;
  LayoutClass label = LayoutClass::Paragraph;

  friend bool operator==(const AnnotatedElement&, const AnnotatedElement&) = default;
};

struct PageAnnotation {
  std::string page_id;
  int width = 0;
  int height = 0;
  std::vector<AnnotatedElement> elements;

  friend bool operator==(const PageAnnotation&, const PageAnnotation&) = default;
};

using ClassHistogram = std::array<int, kLayoutClassCount>;

ClassHistogram class_histogram(const PageAnnotation& a);

/// Checks page bounds and box validity; throws FormatError.
void validate_annotation(const PageAnnotation& a);

/// Non-Curly elements must not fully contain one another. Returns the
/// offending index pairs.
std::vector<std::pair<std::size_t, std::size_t>> containment_violations(
    const PageAnnotation& a);

// Pascal VOC -----------------------------------------------------------------

/// Serializes with integer coordinates (floor for minima, ceil for maxima).
std::string write_voc(const PageAnnotation& a);
/// Detection dump: same layout plus a `confidence` child per object.
std::string write_voc(const PageAnnotation& a, std::span<const Detection> detections);
PageAnnotation read_voc(const std::string& xml);

PageAnnotation load_voc(const std::filesystem::path& path);
void save_voc(const std::filesystem::path& path, const PageAnnotation& a);

// Manifest -------------------------------------------------------------------

enum class SplitTag : std::uint8_t { None, Train, Val, Test };

std::string_view to_string(SplitTag t);
SplitTag split_tag_from_string(std::string_view s);

struct ManifestEntry {
  std::string page_id;
  std::string image_path;
  std::string annotation_path;
  /// Ground-truth transcript written by the generator; empty when unknown.
  std::string transcript_path;
  SplitTag split = SplitTag::None;
  ClassHistogram class_histogram{};

  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

struct DatasetManifest {
  /// Directory relative paths are resolved against.
  std::filesystem::path root;
  std::vector<ManifestEntry> entries;

  std::filesystem::path resolve(const std::string& relative) const;
};

std::string write_manifest_jsonl(const DatasetManifest& m);
DatasetManifest read_manifest_jsonl(const std::string& text,
                                    std::filesystem::path root = {});
DatasetManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const std::filesystem::path& path, const DatasetManifest& m);

/// Checks id uniqueness and that every histogram matches its VOC file.
void validate_manifest(const DatasetManifest& m);

/// Tags every entry train or val so per-class element shares in train track
/// `train_fraction`. Small manifests are split exactly; larger ones greedily
/// (rarest class first) and then refined by pairwise swaps. Deterministic for
/// a given seed.
DatasetManifest stratified_split(const DatasetManifest& m, double train_fraction,
                                 std::uint64_t seed);

struct RangeStats {
  double min = 0.0;
  double max = 0.0;
  double mean = 0.0;
};

/// Aspect ratio (width/height) and scale (sqrt of area) over every box.
struct BBoxStats {
  RangeStats aspect_ratio;
  RangeStats scale;
  std::size_t count = 0;
};

BBoxStats bbox_stats(std::span<const PageAnnotation> pages);
BBoxStats bbox_stats(const DatasetManifest& m);

// Detection interchange ------------------------------------------------------

struct PageDetections {
  std::string page_id;
  std::vector<Detection> detections;
};

/// JSON array of {page_id, label, confidence, box:[x_min,y_min,x_max,y_max]}.
std::string write_detections_json(std::span<const PageDetections> pages);
/// Validates and groups by page_id in order of first appearance.
std::vector<PageDetections> read_detections_json(const std::string& text);
/// Schema problems found in an interchange document; empty when valid.
std::vector<std::string> validate_detections_json(const std::string& text);

}  // namespace schematik

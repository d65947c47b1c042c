#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "schematik/corpus.hpp"
#include "schematik/image.hpp"

namespace schematik {

using DetectorOutput = PageDetections;

/// Contract shared by every layout detector. Implementations are safe for
/// concurrent calls on different pages.
class Detector {
 public:
  virtual ~Detector() = default;
  virtual std::string name() const = 0;
  /// No returned coordinate lies outside the page.
  virtual DetectorOutput detect(const PageImage& page, const std::string& page_id) const = 0;
};

// Oracle ---------------------------------------------------------------------

struct OraclePerturbation {
  double jitter_sigma = 0.0;
  double label_flip_prob = 0.0;
  /// Confidence is drawn around these means with `confidence_spread` stddev
  /// and clamped to [0,1].
  double confidence_correct = 1.0;
  double confidence_flipped = 1.0;
  double confidence_spread = 0.0;
};

/// Replays ground truth with optional perturbation. Zero perturbation
/// returns the annotation exactly with confidence 1.
DetectorOutput oracle_detect(const PageAnnotation& a, const OraclePerturbation& p,
                             std::uint64_t seed);

class OracleDetector : public Detector {
 public:
  OracleDetector(std::map<std::string, PageAnnotation> truth, OraclePerturbation p,
                 std::uint64_t seed);
  std::string name() const override { return "oracle"; }
  DetectorOutput detect(const PageImage& page, const std::string& page_id) const override;

 private:
  std::map<std::string, PageAnnotation> truth_;
  OraclePerturbation perturbation_;
  std::uint64_t seed_;
};

// RLSA -----------------------------------------------------------------------

struct RlsaParams {
  /// Absolute thresholds in px; 0 derives them from the character height.
  int horizontal_threshold_1 = 0;
  int vertical_threshold = 0;
  int horizontal_threshold_2 = 0;
  double horizontal_factor_1 = 8.0;
  double vertical_factor = 0.8;
  double horizontal_factor_2 = 6.0;
  int binarize_threshold = 128;
  double min_block_area = 16.0;
};

struct BlockStats {
  double black_pixel_density = 0.0;
  double aspect_ratio = 0.0;
  double height = 0.0;
  /// Median height of the ink components inside the block.
  double char_height = 0.0;
};

struct Block {
  BoundingBox box;
  BlockStats stats;
};

/// Fills every white run shorter than `threshold` that has black on both
/// sides. Runs touching either end are left alone.
std::vector<std::uint8_t> rlsa_smooth(const std::vector<std::uint8_t>& bits, int threshold);

struct Component {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;  // inclusive pixel extent
  std::size_t pixels = 0;
  /// Row-major index of the first pixel reached by the scan.
  std::size_t first = 0;
};

/// 8-connected components of a binary mask; `labels`, when given, receives
/// 1 + component index per pixel (0 for background).
std::vector<Component> connected_components(const std::vector<std::uint8_t>& mask, int width,
                                            int height, std::vector<int>* labels = nullptr);

/// Median connected-component height of the ink, 0 for a blank mask.
double estimate_char_height(const std::vector<std::uint8_t>& mask, int width, int height);

struct RlsaThresholds {
  int horizontal_1 = 1;
  int vertical = 1;
  int horizontal_2 = 1;
};

RlsaThresholds resolve_thresholds(const RlsaParams& p, double char_height);

std::vector<Block> rlsa_segment(const PageImage& page, const RlsaParams& params);

inline constexpr double kRlsaConfidence = 0.5;

/// Rule table mapping blocks to layout classes.
std::vector<Detection> classify_blocks(const std::vector<Block>& blocks, int page_w, int page_h);

class RlsaDetector : public Detector {
 public:
  explicit RlsaDetector(RlsaParams p = {}) : params_(p) {}
  std::string name() const override { return "rlsa"; }
  DetectorOutput detect(const PageImage& page, const std::string& page_id) const override;

 private:
  RlsaParams params_;
};

// External -------------------------------------------------------------------

/// Serves detections from an interchange file validated at load time.
class ExternalDetector : public Detector {
 public:
  explicit ExternalDetector(const std::filesystem::path& interchange);
  std::string name() const override { return "external"; }
  DetectorOutput detect(const PageImage& page, const std::string& page_id) const override;

 private:
  std::map<std::string, std::vector<Detection>> pages_;
};

}  // namespace schematik

#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include <Eigen/Geometry>

#include "schematik/corpus.hpp"
#include "schematik/image.hpp"
#include "schematik/random.hpp"

namespace schematik {

using Affine = Eigen::Affine2d;

struct AugmentParams {
  double rotation_min_deg = -5.0;
  double rotation_max_deg = 5.0;
  double scale_min = 0.9;
  double scale_max = 1.1;
  /// Fraction of each page dimension cut away before resizing back.
  double crop_min = 0.0;
  double crop_max = 0.05;
  /// Peak displacement of the photometric warp, px. Must stay below 2.
  double distortion_px = 1.0;
  /// Largest box-blur kernel side; 0 or 1 disables blur.
  int blur_max_px = 3;
  double noise_sigma = 8.0;
  double flip_probability = 0.0;
  std::uint64_t seed = 0;

  /// Parameters that leave every input unchanged.
  static AugmentParams identity();
  /// Throws std::invalid_argument on unordered ranges or bad probabilities.
  void validate() const;
};

AugmentParams augment_params_from_json(const std::string& text);
std::string augment_params_to_json(const AugmentParams& p);

/// Hull of the four transformed corners clipped to the page, or nullopt when
/// less than 20% of the transformed area survives. Throws
/// std::invalid_argument for a singular transform.
std::optional<BoundingBox> transform_bbox(const BoundingBox& b, const Affine& t, double page_w,
                                          double page_h);

Affine horizontal_flip(double page_w);
/// Rotation by `degrees` (counter-clockwise on screen) and uniform scaling
/// about the page center.
Affine rotate_scale_about_center(double degrees, double scale, double page_w, double page_h);

/// Maps source coordinates to output coordinates. Pixels are resampled
/// bilinearly through the inverse with white fill.
PageImage warp_image(const PageImage& img, const Affine& t);

struct AugmentResult {
  PageImage image;
  PageAnnotation annotation;
  Affine transform = Affine::Identity();
};

/// Draws one geometric transform for a page from `params` and `rng`.
Affine sample_transform(const AugmentParams& params, int page_w, int page_h, Rng& rng);

/// Geometric transform followed by photometric distortion, blur and noise.
/// Deterministic in (inputs, params.seed).
AugmentResult augment(const PageImage& img, const PageAnnotation& ann,
                      const AugmentParams& params);

}  // namespace schematik

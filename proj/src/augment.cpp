#include "schematik/augment.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <stdexcept>

#include "json.hpp"

namespace schematik {

using nlohmann::json;

AugmentParams AugmentParams::identity() {
  AugmentParams p;
  p.rotation_min_deg = p.rotation_max_deg = 0.0;
  p.scale_min = p.scale_max = 1.0;
  p.crop_min = p.crop_max = 0.0;
  p.distortion_px = 0.0;
  p.blur_max_px = 0;
  p.noise_sigma = 0.0;
  p.flip_probability = 0.0;
  return p;
}

void AugmentParams::validate() const {
  auto fail = [](const std::string& msg) { throw std::invalid_argument("AugmentParams: " + msg); };
  if (!(rotation_min_deg <= rotation_max_deg)) fail("rotation range is not ordered");
  if (!(scale_min <= scale_max) || !(scale_min > 0.0)) fail("scale range must be ordered and positive");
  if (!(crop_min <= crop_max) || crop_min < 0.0 || crop_max >= 0.5) {
    fail("crop range must be ordered within [0, 0.5)");
  }
  if (!(distortion_px >= 0.0 && distortion_px < 2.0)) fail("distortion must be in [0, 2) px");
  if (blur_max_px < 0) fail("blur kernel must be non-negative");
  if (!(noise_sigma >= 0.0)) fail("noise sigma must be non-negative");
  if (!(flip_probability >= 0.0 && flip_probability <= 1.0)) fail("flip probability outside [0,1]");
}

AugmentParams augment_params_from_json(const std::string& text) {
  AugmentParams p;
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("augment params: ") + e.what());
  }
  if (!j.is_object()) throw FormatError("augment params must be a flat JSON object");
  std::map<std::string, double*> reals{
      {"rotation_min_deg", &p.rotation_min_deg}, {"rotation_max_deg", &p.rotation_max_deg},
      {"scale_min", &p.scale_min},               {"scale_max", &p.scale_max},
      {"crop_min", &p.crop_min},                 {"crop_max", &p.crop_max},
      {"distortion_px", &p.distortion_px},       {"noise_sigma", &p.noise_sigma},
      {"flip_probability", &p.flip_probability},
  };
  for (const auto& [key, value] : j.items()) {
    try {
      if (auto it = reals.find(key); it != reals.end()) {
        *it->second = value.get<double>();
      } else if (key == "blur_max_px") {
        p.blur_max_px = value.get<int>();
      } else if (key == "seed") {
        p.seed = value.get<std::uint64_t>();
      } else {
        throw FormatError("augment params: unknown key '" + key + "'");
      }
    } catch (const json::type_error& e) {
      throw FormatError("augment params: bad value for '" + key + "': " + e.what());
    }
  }
  p.validate();
  return p;
}

std::string augment_params_to_json(const AugmentParams& p) {
  return json{{"rotation_min_deg", p.rotation_min_deg},
              {"rotation_max_deg", p.rotation_max_deg},
              {"scale_min", p.scale_min},
              {"scale_max", p.scale_max},
              {"crop_min", p.crop_min},
              {"crop_max", p.crop_max},
              {"distortion_px", p.distortion_px},
              {"blur_max_px", p.blur_max_px},
              {"noise_sigma", p.noise_sigma},
              {"flip_probability", p.flip_probability},
              {"seed", p.seed}}
      .dump(2);
}

std::optional<BoundingBox> transform_bbox(const BoundingBox& b, const Affine& t, double page_w,
                                          double page_h) {
  if (std::abs(t.linear().determinant()) < 1e-12) {
    throw std::invalid_argument("transform_bbox: singular transform");
  }
  const Eigen::Vector2d corners[4] = {{b.x_min, b.y_min}, {b.x_max, b.y_min},
                                      {b.x_min, b.y_max}, {b.x_max, b.y_max}};
  BoundingBox hull{INFINITY, INFINITY, -INFINITY, -INFINITY};
  for (const auto& c : corners) {
    const Eigen::Vector2d p = t * c;
    hull.x_min = std::min(hull.x_min, p.x());
    hull.y_min = std::min(hull.y_min, p.y());
    hull.x_max = std::max(hull.x_max, p.x());
    hull.y_max = std::max(hull.y_max, p.y());
  }
  const double full = area(hull);
  BoundingBox clipped = hull;
  if (!clip_to_page(clipped, page_w, page_h)) return std::nullopt;
  if (area(clipped) < 0.2 * full) return std::nullopt;
  return clipped;
}

Affine horizontal_flip(double page_w) {
  Affine t = Affine::Identity();
  t.linear()(0, 0) = -1.0;
  t.translation().x() = page_w;
  return t;
}

Affine rotate_scale_about_center(double degrees, double scale, double page_w, double page_h) {
  const Eigen::Vector2d c(0.5 * page_w, 0.5 * page_h);
  // Screen y points down, so a visually counter-clockwise turn is a negative
  // angle in the math convention.
  const double rad = -degrees * std::numbers::pi / 180.0;
  Affine t = Affine::Identity();
  t.translate(c).rotate(rad).scale(scale).translate(-c);
  return t;
}

PageImage warp_image(const PageImage& img, const Affine& t) {
  if (t.matrix() == Affine::Identity().matrix()) return img;
  if (std::abs(t.linear().determinant()) < 1e-12) {
    throw std::invalid_argument("warp_image: singular transform");
  }
  const Affine inv = t.inverse();
  PageImage out(img.width(), img.height());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const Eigen::Vector2d src = inv * Eigen::Vector2d(x + 0.5, y + 0.5);
      const double v = img.sample_bilinear(src.x(), src.y());
      out.at(x, y) = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
    }
  }
  return out;
}

Affine sample_transform(const AugmentParams& params, int page_w, int page_h, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto lerp = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };
  const double crop = lerp(params.crop_min, params.crop_max);
  const double ox = unit(rng) * crop * page_w;
  const double oy = unit(rng) * crop * page_h;
  const double angle = lerp(params.rotation_min_deg, params.rotation_max_deg);
  const double scale = lerp(params.scale_min, params.scale_max);
  const bool flip = unit(rng) < params.flip_probability;

  Affine t = Affine::Identity();
  if (crop > 0.0) {
    // Cut the window [ox, ox + (1-crop)W] and stretch it back to full size.
    Affine c = Affine::Identity();
    c.scale(1.0 / (1.0 - crop)).translate(Eigen::Vector2d(-ox, -oy));
    t = c;
  }
  if (angle != 0.0 || scale != 1.0) t = rotate_scale_about_center(angle, scale, page_w, page_h) * t;
  if (flip) t = horizontal_flip(page_w) * t;
  return t;
}

namespace {

PageImage distort(const PageImage& img, double amplitude, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double two_pi = 2.0 * std::numbers::pi;
  const double lx = img.width() * (0.5 + 1.5 * unit(rng));
  const double ly = img.height() * (0.5 + 1.5 * unit(rng));
  const double px = two_pi * unit(rng);
  const double py = two_pi * unit(rng);
  if (amplitude <= 0.0) return img;
  PageImage out(img.width(), img.height());
  for (int y = 0; y < img.height(); ++y) {
    const double dx = amplitude * std::sin(two_pi * y / ly + py);
    for (int x = 0; x < img.width(); ++x) {
      const double dy = amplitude * std::sin(two_pi * x / lx + px);
      const double v = img.sample_bilinear(x + 0.5 + dx, y + 0.5 + dy);
      out.at(x, y) = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
    }
  }
  return out;
}

PageImage box_blur(const PageImage& img, int k) {
  if (k <= 1) return img;
  const int lo = (k - 1) / 2;
  const int hi = k / 2;
  const int w = img.width();
  const int h = img.height();
  std::vector<double> tmp(static_cast<std::size_t>(w) * h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int d = -lo; d <= hi; ++d) s += img.at(std::clamp(x + d, 0, w - 1), y);
      tmp[static_cast<std::size_t>(y) * w + x] = s / k;
    }
  }
  PageImage out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int d = -lo; d <= hi; ++d) s += tmp[static_cast<std::size_t>(std::clamp(y + d, 0, h - 1)) * w + x];
      out.at(x, y) = static_cast<std::uint8_t>(std::clamp(std::lround(s / k), 0L, 255L));
    }
  }
  return out;
}

}  // namespace

AugmentResult augment(const PageImage& img, const PageAnnotation& ann,
                      const AugmentParams& params) {
  params.validate();
  Rng rng(derive_seed(params.seed, "augment", ann.page_id));
  AugmentResult r;
  r.transform = sample_transform(params, img.width(), img.height(), rng);
  r.annotation = ann;
  r.annotation.elements.clear();
  for (const auto& e : ann.elements) {
    if (auto b = transform_bbox(e.box, r.transform, ann.width, ann.height)) {
      r.annotation.elements.push_back({*b, e.label});
    }
  }
  r.image = warp_image(img, r.transform);
  r.image = distort(r.image, params.distortion_px, rng);
  const int k = params.blur_max_px > 1
                    ? std::uniform_int_distribution<int>(1, params.blur_max_px)(rng)
                    : 1;
  r.image = box_blur(r.image, k);
  if (params.noise_sigma > 0.0) {
    std::normal_distribution<double> noise(0.0, params.noise_sigma);
    for (auto& p : r.image.pixels()) {
      p = static_cast<std::uint8_t>(std::clamp(std::lround(p + noise(rng)), 0L, 255L));
    }
  }
  return r;
}

}  // namespace schematik

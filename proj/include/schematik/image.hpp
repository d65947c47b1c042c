#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "schematik/geometry.hpp"

namespace schematik {

/// 8-bit grayscale raster, 0 = black, 255 = white, row-major.
class PageImage {
 public:
  PageImage() = default;
  PageImage(int width, int height, std::uint8_t fill = 255);
  PageImage(int width, int height, std::vector<std::uint8_t> pixels);

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return pixels_.empty(); }

  std::uint8_t at(int x, int y) const { return pixels_[index(x, y)]; }
  std::uint8_t& at(int x, int y) { return pixels_[index(x, y)]; }
  const std::vector<std::uint8_t>& pixels() const { return pixels_; }
  std::vector<std::uint8_t>& pixels() { return pixels_; }

  bool in_bounds(int x, int y) const {
    return x >= 0 && y >= 0 && x < width_ && y < height_;
  }

  /// Bilinear sample at a real-valued position in pixel-center coordinates
  /// (pixel (i,j) has its center at (i+0.5, j+0.5)); outside reads `fill`.
  double sample_bilinear(double x, double y, double fill = 255.0) const;

  void fill_rect(int x0, int y0, int x1, int y1, std::uint8_t value);

  friend bool operator==(const PageImage&, const PageImage&) = default;

 private:
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> pixels_;
};

/// Binary ink mask: true where the gray level is below `threshold`.
std::vector<std::uint8_t> binarize(const PageImage& img, int threshold = 128);

/// Copies the pixel rectangle covered by `box`. Corners are rounded
/// half-away-from-zero; throws std::invalid_argument for an empty crop.
PageImage crop(const PageImage& img, const BoundingBox& box);

/// Bilinear resize with pixel-center alignment.
PageImage resize_bilinear(const PageImage& img, int out_w, int out_h);

std::vector<std::uint8_t> encode_png(const PageImage& img);
PageImage decode_png(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> encode_pgm(const PageImage& img);
PageImage decode_pgm(const std::vector<std::uint8_t>& bytes);

/// Reads PNG or binary PGM (detected from the magic bytes).
PageImage read_image(const std::filesystem::path& path);
/// Writes PNG unless the extension is `.pgm`.
void write_image(const std::filesystem::path& path, const PageImage& img);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path,
                      const std::vector<std::uint8_t>& bytes);
std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace schematik
